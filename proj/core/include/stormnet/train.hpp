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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/losses.hpp"
#include "stormnet/model.hpp"
#include "stormnet/optim.hpp"
#include "stormnet/task.hpp"

namespace stormnet {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  OptimizerConfig optimizer;
  Loss loss{LossKind::bce, 1.0};
  double plateau_eps = 1e-6;
  std::size_t patience = 5;
  bool augment = false;
  std::uint64_t seed = 0;
  bool eval_every_epoch = true;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep the values of \p defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

enum class StopReason { none, max_epochs, plateau };

std::string to_string(StopReason reason);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  StopReason stop = StopReason::none;
  std::size_t train_samples = 0;

  /// epoch,train_loss,val_loss,val_metric,seconds
  std::string csv() const;
};

/// Mini-batch training with plateau stopping on the validation loss.
///
/// Every source of randomness is derived from the config seed and the
/// (epoch, batch) position, so a run restored from a checkpoint continues
/// exactly as the uninterrupted run would.
class Trainer {
 public:
  Trainer(Model model, TrainConfig config);

  Model& model() noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }
  const TrainLog& log() const noexcept { return log_; }
  std::size_t epochs_done() const noexcept { return log_.epochs.size(); }
  bool stopped() const noexcept { return log_.stop != StopReason::none; }

  /// Trains until a stopping rule fires or \p epoch_limit epochs are done in
  /// total. Throws NumericError naming the epoch and batch on a non-finite
  /// loss or gradient.
  const TrainLog& fit(const TaskData& train, const TaskData& val,
                      std::size_t epoch_limit = std::numeric_limits<std::size_t>::max());

  std::vector<std::uint8_t> checkpoint();
  static Trainer restore(std::span<const std::uint8_t> bytes);

  /// Called with the sample rows of every batch, in order.
  std::function<void(std::span<const std::size_t>)> on_batch;
  std::function<void(const EpochLog&)> on_epoch;

 private:
  double run_epoch(const TaskData& train, std::size_t epoch);

  Model model_;
  TrainConfig config_;
  Optimizer optimizer_;
  TrainLog log_;
  double previous_val_loss_ = std::numeric_limits<double>::quiet_NaN();
  std::size_t plateau_count_ = 0;
};

/// Trains \p model in place and returns the log.
TrainLog train(Model& model, const TaskData& train, const TaskData& val, const TrainConfig& config);

/// Random geometric transform of [H, W, C] rows plus image noise; map
/// targets follow the geometry.
void augment_batch(Tensor& inputs, Tensor* map_targets, Rng& rng, double noise_sigma = kAugmentNoise);

}  // namespace stormnet
