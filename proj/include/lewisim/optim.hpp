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
// Gradient-based parameter updates, global-norm clipping and early stopping.

#ifndef LEWISIM_OPTIM_HPP_
#define LEWISIM_OPTIM_HPP_

#include <cmath>
#include <limits>
#include <vector>

#include "lewisim/nn.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

/// Gradients aligned entry-for-entry with a ParamSet.
using Grads = std::vector<std::vector<double>>;

inline Grads collect_grads(const Tape& tape, const ParamSet& params) {
  Grads out;
  out.reserve(params.size());
  for (const auto& [name, p] : params) {
    out.push_back(tape.grad(*p).data());
  }
  return out;
}

inline double global_norm(const Grads& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  return std::sqrt(sq);
}

/// Scales all gradients jointly so the global L2 norm never exceeds
/// `max_norm`; a no-op when already within bound.
inline void clip_global_norm(Grads& grads, double max_norm) {
  if (max_norm <= 0.0) throw ValueError("clip_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& g : grads)
    for (double& v : g) v *= s;
}

/// Plain gradient descent: theta <- theta - lr * grad.
inline void sgd_step(ParamSet& params, const Grads& grads, double lr) {
  if (grads.size() != params.size()) {
    throw ShapeError("sgd_step: gradient count does not match parameter count");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    auto& v = params[i].second->mutable_data();
    const auto& g = grads[i];
    if (g.size() != v.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch for " +
                       params[i].first);
    }
    for (size_t k = 0; k < v.size(); ++k) v[k] -= lr * g[k];
  }
}

/// AdamW with decoupled weight decay. Moment buffers mirror the parameter
/// shapes; t counts completed steps.
class AdamW {
 public:
  struct Options {
    double lr = 4e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  explicit AdamW(Options opts = {}) : opts_(opts) {}

  void step(ParamSet& params, const Grads& grads) {
    if (grads.size() != params.size()) {
      throw ShapeError("AdamW: gradient count does not match parameter count");
    }
    if (slots_.empty()) {
      slots_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        slots_[i].m.assign(params[i].second->size(), 0.0);
        slots_[i].v.assign(params[i].second->size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& theta = params[i].second->mutable_data();
      const auto& g = grads[i];
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      if (g.size() != theta.size()) {
        throw ShapeError("AdamW: gradient shape mismatch for " +
                         params[i].first);
      }
      for (size_t k = 0; k < theta.size(); ++k) {
        m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g[k];
        v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g[k] * g[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        theta[k] -= opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                                opts_.weight_decay * theta[k]);
      }
    }
  }

  int64_t steps_taken() const { return t_; }
  const Options& options() const { return opts_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  Options opts_;
  std::vector<Slot> slots_;
  int64_t t_ = 0;
};

/// Watches a validation loss; reports stop after `patience` consecutive
/// non-improving observations. Equality and NaN both count as non-improving.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  struct Decision {
    bool stop = false;
    bool improved = false;
  };

  Decision observe(double val_loss) {
    ++observations_;
    Decision d;
    if (std::isnan(val_loss)) {
      saw_nan_ = true;
    } else if (val_loss < best_) {
      best_ = val_loss;
      best_index_ = observations_;
      stale_ = 0;
      d.improved = true;
      return d;
    }
    ++stale_;
    d.stop = stale_ >= patience_;
    return d;
  }

  double best_loss() const { return best_; }
  /// 1-based index of the best observation (the checkpoint to keep).
  int best_index() const { return best_index_; }
  int observations() const { return observations_; }
  bool saw_nan() const { return saw_nan_; }

 private:
  double best_ = std::numeric_limits<double>::infinity();
  int best_index_ = -1;
  int patience_;
  int stale_ = 0;
  int observations_ = 0;
  bool saw_nan_ = false;
};

}  // namespace lewisim

#endif  // LEWISIM_OPTIM_HPP_
