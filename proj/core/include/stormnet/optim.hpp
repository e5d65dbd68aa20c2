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
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stormnet/layers.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

enum class OptimizerKind { sgd, adam, rmsprop };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double epsilon = 1e-8;
};

/// A parameter as seen by the optimizer: stable name, value, gradient.
struct ParamRef {
  std::string name;
  Tensor* value;
  const Tensor* grad;
};

/// Descent-direction updates:
///   sgd:     theta -= lr * g
///   adam:    m, v moments with bias correction; theta -= lr * mhat / (sqrt(vhat) + eps)
///   rmsprop: v = rho v + (1 - rho) g^2;          theta -= lr * g / (sqrt(v) + eps)
///
/// Moment state is keyed by parameter name and created on first use, so the
/// update does not depend on the order parameters are listed in.
class Optimizer {
 public:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  explicit Optimizer(OptimizerConfig config = {});

  /// Applies one update to every parameter. All gradients are validated
  /// before anything is modified.
  void step(std::span<const ParamRef> params);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const std::map<std::string, Moments>& state() const noexcept { return state_; }

  /// Restores persisted state (checkpoint resume).
  void restore(std::uint64_t steps, std::map<std::string, Moments> state);

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace stormnet
