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
// Independent finite-difference oracle for gradient checks. Evaluates the
// loss as a plain double-valued function of the current parameter values, so
// it shares no code path with Tape::backward.

#ifndef LEWISIM_TESTS_SUPPORT_GRADCHECK_HPP_
#define LEWISIM_TESTS_SUPPORT_GRADCHECK_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "lewisim/tensor.hpp"

namespace lewisim::testing {

/// Central finite differences of `loss_fn` (which must read the parameter's
/// current values) with respect to every entry of `param`.
inline std::vector<double> finite_diff_grad(
    Tensor& param, const std::function<double()>& loss_fn, double h = 1e-5) {
  std::vector<double> grad(param.size());
  auto& values = param.mutable_data();
  for (size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss_fn();
    values[i] = saved - h;
    const double down = loss_fn();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| / max(1, |b|), the relative-error convention used throughout.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

inline double max_rel_err(const std::vector<double>& autodiff,
                          const std::vector<double>& fd) {
  double worst = 0.0;
  for (size_t i = 0; i < autodiff.size(); ++i) {
    worst = std::max(worst, rel_err(autodiff[i], fd[i]));
  }
  return worst;
}

}  // namespace lewisim::testing

#endif  // LEWISIM_TESTS_SUPPORT_GRADCHECK_HPP_
