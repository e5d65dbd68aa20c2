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

#pragma once

#include <functional>

#include "stormnet/tensor.hpp"

namespace stormnet {

inline constexpr double kFiniteDifferenceStep = 1e-6;

/// Central finite-difference gradient of \p f at \p theta. \p theta is
/// perturbed in place and restored.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, Tensor& theta,
                                  double h = kFiniteDifferenceStep);

/// max_i |fd_i - an_i| / max(1e-8, |fd_i| + |an_i|).
double relative_error(const Tensor& numeric, const Tensor& analytic);

/// Compares \p analytic against central differences of \p f at \p theta.
/// Throws NumericError if f returns a non-finite value.
double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                               const Tensor& analytic, double h = kFiniteDifferenceStep);

}  // namespace stormnet
