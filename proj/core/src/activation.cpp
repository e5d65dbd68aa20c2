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

#include "stormnet/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stormnet/errors.hpp"

namespace stormnet {

namespace {
// Keeps sigmoid strictly inside (0, 1) where exp under/overflows.
constexpr double kSigmoidLow = std::numeric_limits<double>::denorm_min();
constexpr double kSigmoidHigh = 1.0 - 0x1.0p-53;
}  // namespace

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::linear: return "linear";
    case ActivationKind::relu: return "relu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::softmax: return "softmax";
    case ActivationKind::softplus: return "softplus";
  }
  return "?";
}

ActivationKind activation_from_string(std::string_view name) {
  if (name == "linear") return ActivationKind::linear;
  if (name == "relu") return ActivationKind::relu;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "softmax") return ActivationKind::softmax;
  if (name == "softplus") return ActivationKind::softplus;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, kSigmoidLow, kSigmoidHigh);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

void activate(ActivationKind kind, std::span<const double> pre, std::span<double> out, std::size_t row) {
  const std::size_t n = pre.size();
  switch (kind) {
    case ActivationKind::linear:
      std::copy(pre.begin(), pre.end(), out.begin());
      return;
    case ActivationKind::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      return;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(pre[i]);
      return;
    case ActivationKind::softplus:
      for (std::size_t i = 0; i < n; ++i) out[i] = softplus(pre[i]);
      return;
    case ActivationKind::softmax:
      for (std::size_t r = 0; r < n; r += row) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < row; ++j) m = std::max(m, pre[r + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < row; ++j) {
          out[r + j] = std::exp(pre[r + j] - m);
          z += out[r + j];
        }
        for (std::size_t j = 0; j < row; ++j) out[r + j] /= z;
      }
      return;
  }
}

void activate_backward(ActivationKind kind, std::span<const double> pre, std::span<const double> out,
                       std::span<const double> grad_out, std::span<double> grad_pre, std::size_t row) {
  const std::size_t n = pre.size();
  switch (kind) {
    case ActivationKind::linear:
      std::copy(grad_out.begin(), grad_out.end(), grad_pre.begin());
      return;
    case ActivationKind::relu:
      for (std::size_t i = 0; i < n; ++i) grad_pre[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
      return;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) grad_pre[i] = grad_out[i] * out[i] * (1.0 - out[i]);
      return;
    case ActivationKind::softplus:
      for (std::size_t i = 0; i < n; ++i) grad_pre[i] = grad_out[i] * sigmoid(pre[i]);
      return;
    case ActivationKind::softmax:
      for (std::size_t r = 0; r < n; r += row) {
        double dot = 0.0;
        for (std::size_t j = 0; j < row; ++j) dot += grad_out[r + j] * out[r + j];
        for (std::size_t j = 0; j < row; ++j) grad_pre[r + j] = out[r + j] * (grad_out[r + j] - dot);
      }
      return;
  }
}

Tensor apply_activation(ActivationKind kind, const Tensor& pre) {
  Tensor out(pre.shape());
  activate(kind, pre.data(), out.data(), pre.shape().back());
  return out;
}

}  // namespace stormnet
