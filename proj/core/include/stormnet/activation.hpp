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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "stormnet/tensor.hpp"

namespace stormnet {

/// Pointwise nonlinearities. softmax normalizes over the last axis;
/// softplus is log(1 + e^x), used to keep count outputs non-negative.
enum class ActivationKind { linear, relu, sigmoid, softmax, softplus };

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);

/// Writes act(pre) into out. \p row is the last-axis length (softmax only).
void activate(ActivationKind kind, std::span<const double> pre, std::span<double> out, std::size_t row);

/// grad_pre = d act / d pre applied to grad_out, given the cached pre and out.
void activate_backward(ActivationKind kind, std::span<const double> pre, std::span<const double> out,
                       std::span<const double> grad_out, std::span<double> grad_pre, std::size_t row);

Tensor apply_activation(ActivationKind kind, const Tensor& pre);

double sigmoid(double x);
double softplus(double x);

}  // namespace stormnet
