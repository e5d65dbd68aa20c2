/*
 * Copyright 2026 The Stormnet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "stormnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "stormnet/errors.hpp"

namespace stormnet {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, Tensor& theta, double h) {
  Tensor g(theta.shape());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = f(theta);
    theta[i] = saved - h;
    const double down = f(theta);
    theta[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite difference: objective is non-finite at coordinate " + std::to_string(i));
    }
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Tensor& numeric, const Tensor& analytic) {
  if (numeric.shape() != analytic.shape()) {
    throw ShapeError("relative_error: shape mismatch " + shape_str(numeric.shape()) + " vs " +
                     shape_str(analytic.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max(1e-8, std::fabs(numeric[i]) + std::fabs(analytic[i]));
    worst = std::max(worst, std::fabs(numeric[i] - analytic[i]) / denom);
  }
  return worst;
}

double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                               const Tensor& analytic, double h) {
  Tensor work = theta;
  return relative_error(finite_difference_gradient(f, work, h), analytic);
}

}  // namespace stormnet
