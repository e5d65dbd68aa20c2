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

#include "stormnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce: return "bce";
    case LossKind::cce: return "cce";
    case LossKind::mse: return "mse";
    case LossKind::mae: return "mae";
    case LossKind::weighted_bce: return "weighted_bce";
  }
  return "?";
}

LossKind loss_from_string(std::string_view name) {
  if (name == "bce") return LossKind::bce;
  if (name == "cce") return LossKind::cce;
  if (name == "mse") return LossKind::mse;
  if (name == "mae") return LossKind::mae;
  if (name == "weighted_bce") return LossKind::weighted_bce;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

namespace {

LossValue binary_cross_entropy(const Tensor& y_hat, const Tensor& y, double pos_weight) {
  const double n = static_cast<double>(y.size());
  LossValue out{0.0, Tensor(y.shape())};
  // Extended-precision accumulation keeps the reduction from adding rounding
  // noise on top of the forward pass.
  long double total = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(y_hat[i], kProbClamp, 1.0 - kProbClamp);
    const double t = y[i];
    total += pos_weight * t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    // d/dp of -(w t log p + (1-t) log(1-p)), divided by n
    out.grad[i] = (-pos_weight * t / p + (1.0 - t) / (1.0 - p)) / n;
  }
  out.value = static_cast<double>(-total / n);
  return out;
}

}  // namespace

LossValue loss_and_grad(const Loss& loss, const Tensor& y_hat, const Tensor& y) {
  if (y_hat.shape() != y.shape()) {
    throw ShapeError("loss: prediction shape " + shape_str(y_hat.shape()) + " does not match target " +
                     shape_str(y.shape()));
  }
  const double n = static_cast<double>(y.size());
  switch (loss.kind) {
    case LossKind::bce:
      return binary_cross_entropy(y_hat, y, 1.0);
    case LossKind::weighted_bce:
      if (!(loss.pos_weight > 0.0)) throw ConfigError("weighted_bce needs pos_weight > 0");
      return binary_cross_entropy(y_hat, y, loss.pos_weight);
    case LossKind::cce: {
      LossValue out{0.0, Tensor(y.shape())};
      long double total = 0.0L;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(y_hat[i], kProbClamp, 1.0);
        total += y[i] * std::log(p);
        out.grad[i] = -y[i] / p / n;
      }
      out.value = static_cast<double>(-total / n);
      return out;
    }
    case LossKind::mse: {
      LossValue out{0.0, Tensor(y.shape())};
      long double total = 0.0L;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y_hat[i] - y[i];
        total += d * d;
        out.grad[i] = 2.0 * d / n;
      }
      out.value = static_cast<double>(total / n);
      return out;
    }
    case LossKind::mae: {
      LossValue out{0.0, Tensor(y.shape())};
      long double total = 0.0L;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y_hat[i] - y[i];
        total += std::fabs(d);
        out.grad[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
      }
      out.value = static_cast<double>(total / n);
      return out;
    }
  }
  throw ConfigError("unsupported loss");
}

}  // namespace stormnet
