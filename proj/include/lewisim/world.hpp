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
//
// Synthetic attribute-valued object universe, dataset splits and episode
// construction for the discrimination and reconstruction games.

#ifndef LEWISIM_WORLD_HPP_
#define LEWISIM_WORLD_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "lewisim/rng.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// K independent attributes, each taking one of V_attr values.
struct AttributeSpace {
  int num_attributes = 0;   // K
  int values_per_attribute = 0;  // V_attr

  int64_t total_objects() const {
    int64_t n = 1;
    for (int k = 0; k < num_attributes; ++k) n *= values_per_attribute;
    return n;
  }
  int onehot_dim() const { return num_attributes * values_per_attribute; }
};

struct ObjectInstance {
  std::vector<int> attrs;  // length K, values in [0, V_attr)

  bool operator==(const ObjectInstance& o) const { return attrs == o.attrs; }
};

struct Dataset {
  AttributeSpace space;
  std::vector<ObjectInstance> objects;

  int64_t size() const { return static_cast<int64_t>(objects.size()); }
};

// Desk-scale guard; enumeration is dense and in-memory.
inline constexpr int64_t kMaxObjects = 1 << 20;

/// All V_attr^K objects exactly once, in lexicographic attribute order.
inline Dataset enumerate_objects(const AttributeSpace& space) {
  if (space.num_attributes < 1) {
    throw ConfigError("attribute space needs at least 1 attribute");
  }
  if (space.values_per_attribute < 2) {
    throw ConfigError("attribute space needs at least 2 values per attribute");
  }
  const int64_t total = space.total_objects();
  if (total > kMaxObjects) {
    throw ConfigError("object universe too large: " + std::to_string(total) +
                      " > " + std::to_string(kMaxObjects));
  }
  Dataset ds;
  ds.space = space;
  ds.objects.reserve(total);
  std::vector<int> attrs(space.num_attributes, 0);
  for (int64_t i = 0; i < total; ++i) {
    ds.objects.push_back({attrs});
    for (int k = space.num_attributes - 1; k >= 0; --k) {
      if (++attrs[k] < space.values_per_attribute) break;
      attrs[k] = 0;
    }
  }
  return ds;
}

/// Concatenation of K one-hot blocks of width V_attr; exactly K ones.
inline std::vector<double> encode_onehot(const ObjectInstance& obj,
                                         const AttributeSpace& space) {
  std::vector<double> out(space.onehot_dim(), 0.0);
  for (int k = 0; k < space.num_attributes; ++k) {
    const int v = obj.attrs[k];
    if (v < 0 || v >= space.values_per_attribute) {
      throw ValueError("attribute value " + std::to_string(v) +
                       " out of range");
    }
    out[static_cast<size_t>(k) * space.values_per_attribute + v] = 1.0;
  }
  return out;
}

/// Disjoint index sets into a Dataset's object list.
struct Splits {
  std::vector<int> train, val, test;
};

/// Seeded shuffle followed by a contiguous cut. Val/test sizes are rounded;
/// train receives the remainder. A split with positive fraction must be
/// non-empty.
inline Splits split_dataset(const Dataset& ds,
                            const std::array<double, 3>& fractions,
                            RngStream& rng) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " +
                      std::to_string(sum));
  }
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  }
  const int n = static_cast<int>(ds.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  const int n_val = static_cast<int>(std::llround(n * fractions[1]));
  const int n_test = static_cast<int>(std::llround(n * fractions[2]));
  const int n_train = n - n_val - n_test;

  auto check = [&](const char* name, double frac, int size) {
    if (frac > 0.0 && size <= 0) {
      throw ConfigError(std::string("split: ") + name +
                        " split is empty; dataset too small for fraction " +
                        std::to_string(frac));
    }
  };
  check("train", fractions[0], n_train);
  check("val", fractions[1], n_val);
  check("test", fractions[2], n_test);

  Splits s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

/// One round of the discrimination game: the sender sees the target, the
/// receiver sees N distinct candidates with the target at a random position.
struct DiscriminationEpisode {
  int target_object = -1;        // dataset index
  std::vector<int> candidates;   // dataset indices, pairwise distinct
  int target_index = -1;         // position of the target in candidates
};

inline std::vector<DiscriminationEpisode> build_discrimination_batch(
    const std::vector<int>& split, int num_candidates, int batch_size,
    RngStream& rng) {
  const int n = static_cast<int>(split.size());
  if (num_candidates < 2) {
    throw ConfigError("discrimination game needs at least 2 candidates");
  }
  if (num_candidates > n) {
    throw ConfigError("candidates (" + std::to_string(num_candidates) +
                      ") exceed split size (" + std::to_string(n) + ")");
  }
  std::vector<DiscriminationEpisode> batch(batch_size);
  std::vector<int> pool(n);
  for (auto& ep : batch) {
    const int target_pos = rng.uniform_int(n);
    ep.target_object = split[target_pos];
    // Partial Fisher-Yates over the split minus the target gives N-1
    // distinct distractors without replacement.
    std::iota(pool.begin(), pool.end(), 0);
    std::swap(pool[target_pos], pool[n - 1]);
    ep.candidates.assign(num_candidates, -1);
    ep.target_index = rng.uniform_int(num_candidates);
    int avail = n - 1;
    for (int j = 0; j < num_candidates; ++j) {
      if (j == ep.target_index) {
        ep.candidates[j] = ep.target_object;
        continue;
      }
      const int pick = rng.uniform_int(avail);
      ep.candidates[j] = split[pool[pick]];
      std::swap(pool[pick], pool[avail - 1]);
      --avail;
    }
  }
  return batch;
}

/// Reward 1 iff the receiver picked the target's position.
inline double compute_reward_discrimination(const DiscriminationEpisode& ep,
                                            int action) {
  if (action < 0 || action >= static_cast<int>(ep.candidates.size())) {
    throw ValueError("action index " + std::to_string(action) +
                     " out of range for " +
                     std::to_string(ep.candidates.size()) + " candidates");
  }
  return action == ep.target_index ? 1.0 : 0.0;
}

struct ReconstructionOutcome {
  double reward = 0.0;                 // 1 iff every attribute is correct
  double per_attribute_accuracy = 0.0;
};

/// All-or-nothing reconstruction reward with per-attribute accuracy reported
/// alongside.
inline ReconstructionOutcome compute_reward_reconstruction(
    const ObjectInstance& target, const std::vector<int>& predicted_attrs) {
  if (predicted_attrs.size() != target.attrs.size()) {
    throw ValueError("predicted " + std::to_string(predicted_attrs.size()) +
                     " attributes for a " +
                     std::to_string(target.attrs.size()) + "-attribute object");
  }
  int correct = 0;
  for (size_t k = 0; k < target.attrs.size(); ++k) {
    if (predicted_attrs[k] == target.attrs[k]) ++correct;
  }
  ReconstructionOutcome out;
  out.per_attribute_accuracy =
      static_cast<double>(correct) / static_cast<double>(target.attrs.size());
  out.reward = correct == static_cast<int>(target.attrs.size()) ? 1.0 : 0.0;
  return out;
}

/// Row-major [B, K*V_attr] one-hot batch for the given dataset indices.
inline Tensor onehot_batch(const Dataset& ds, const std::vector<int>& ids) {
  const int dim = ds.space.onehot_dim();
  std::vector<double> data(ids.size() * static_cast<size_t>(dim), 0.0);
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto row = encode_onehot(ds.objects[ids[i]], ds.space);
    std::copy(row.begin(), row.end(), data.begin() + i * dim);
  }
  return Tensor({static_cast<int>(ids.size()), dim}, std::move(data));
}

}  // namespace lewisim

#endif  // LEWISIM_WORLD_HPP_
