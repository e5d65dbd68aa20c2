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

#include "stormnet/optim.hpp"

#include <cmath>

#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::rmsprop: return "rmsprop";
  }
  return "?";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void Optimizer::restore(std::uint64_t steps, std::map<std::string, Moments> state) {
  steps_ = steps;
  state_ = std::move(state);
}

void Optimizer::step(std::span<const ParamRef> params) {
  for (const auto& p : params) {
    if (p.grad->shape() != p.value->shape()) {
      throw ShapeError("optimizer: gradient shape " + shape_str(p.grad->shape()) + " does not match parameter '" +
                       p.name + "' " + shape_str(p.value->shape()));
    }
    if (!all_finite(p.grad->data())) throw NumericError("optimizer: non-finite gradient for parameter '" + p.name + "'");
  }
  ++steps_;
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  const double t = static_cast<double>(steps_);
  for (const auto& p : params) {
    auto theta = p.value->data();
    auto g = p.grad->data();
    switch (config_.kind) {
      case OptimizerKind::sgd:
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
        break;
      case OptimizerKind::adam: {
        auto& st = state_[p.name];
        if (st.m.empty()) st = Moments{Tensor(p.value->shape()), Tensor(p.value->shape())};
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < theta.size(); ++i) {
          st.m[i] = b1 * st.m[i] + (1.0 - b1) * g[i];
          st.v[i] = b2 * st.v[i] + (1.0 - b2) * g[i] * g[i];
          const double mhat = st.m[i] / c1;
          const double vhat = st.v[i] / c2;
          theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        break;
      }
      case OptimizerKind::rmsprop: {
        auto& st = state_[p.name];
        if (st.v.empty()) st = Moments{Tensor(p.value->shape()), Tensor(p.value->shape())};
        const double rho = config_.rho;
        for (std::size_t i = 0; i < theta.size(); ++i) {
          st.v[i] = rho * st.v[i] + (1.0 - rho) * g[i] * g[i];
          theta[i] -= lr * g[i] / (std::sqrt(st.v[i]) + eps);
        }
        break;
      }
    }
  }
}

}  // namespace stormnet
