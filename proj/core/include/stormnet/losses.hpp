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

#include <string>
#include <string_view>

#include "stormnet/tensor.hpp"

namespace stormnet {

enum class LossKind { bce, cce, mse, mae, weighted_bce };

std::string to_string(LossKind kind);
LossKind loss_from_string(std::string_view name);

struct Loss {
  LossKind kind = LossKind::mse;
  double pos_weight = 1.0;  // weighted_bce only
};

struct LossValue {
  double value = 0.0;
  Tensor grad;  // d value / d y_hat
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

/// Mean loss over every element and its gradient with respect to y_hat.
///
/// weighted_bce scales the positive-class log term by pos_weight; with
/// pos_weight = 1 it is identical to bce.
LossValue loss_and_grad(const Loss& loss, const Tensor& y_hat, const Tensor& y);

}  // namespace stormnet
