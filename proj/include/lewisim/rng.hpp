// Copyright 2026 The lewisim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LEWISIM_RNG_HPP_
#define LEWISIM_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace lewisim {

/// A named, independently seeded random stream. All draws are derived from
/// mt19937_64 through fixed arithmetic (no std::*_distribution), so sequences
/// are identical across standard libraries and platforms.
class RngStream {
 public:
  RngStream(uint64_t master_seed, uint64_t stream_id) {
    std::seed_seq seq{static_cast<uint32_t>(master_seed),
                      static_cast<uint32_t>(master_seed >> 32),
                      static_cast<uint32_t>(stream_id),
                      static_cast<uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). Fixed-point multiply keeps the mapping
  /// platform-independent; the bias for desk-scale n is below 2^-50.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    using u128 = unsigned __int128;
    return static_cast<int>((u128(engine_()) * u128(n)) >> 64);
  }

  /// Draw an index from an (approximately normalized) probability vector by
  /// walking the cumulative sum. Mass lost to rounding falls on the last entry.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double cum = 0.0;
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      std::swap(items[i], items[uniform_int(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// The four named streams every run derives from its master seed, plus a
/// dedicated evaluation stream. Consuming one stream never perturbs another,
/// and the evaluation stream is re-derived fresh for every evaluation pass so
/// repeated evaluations see identical episodes.
struct RngHub {
  explicit RngHub(uint64_t master_seed)
      : seed(master_seed),
        init(master_seed, kInit),
        data(master_seed, kData),
        sender(master_seed, kSender),
        receiver(master_seed, kReceiver) {}

  RngStream fresh_eval_stream() const { return RngStream(seed, kEval); }

  static constexpr uint64_t kInit = 0xA11CE001;
  static constexpr uint64_t kData = 0xA11CE002;
  static constexpr uint64_t kSender = 0xA11CE003;
  static constexpr uint64_t kReceiver = 0xA11CE004;
  static constexpr uint64_t kEval = 0xA11CE005;

  uint64_t seed;
  RngStream init;
  RngStream data;
  RngStream sender;
  RngStream receiver;
};

}  // namespace lewisim

#endif  // LEWISIM_RNG_HPP_
