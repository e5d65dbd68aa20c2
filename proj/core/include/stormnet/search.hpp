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
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/model.hpp"
#include "stormnet/task.hpp"
#include "stormnet/train.hpp"

namespace stormnet {

/// Candidate values; every trial draws each entry uniformly. n_layers means
/// hidden layers (mlp), conv blocks (cnn) or depth (unet); widths are dense
/// widths; base_filters seed the doubling filter counts of cnn and unet.
struct SearchSpace {
  std::vector<std::size_t> n_layers{1, 2, 3};
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::vector<std::size_t> base_filters{4, 8, 16};
  std::vector<double> learning_rates{1e-4, 3e-4, 1e-3, 3e-3};
  std::vector<std::size_t> batch_sizes{16, 32, 64};
  std::vector<double> dropout_rates{0.0, 0.1, 0.25};
  std::vector<bool> batchnorm{false, true};
  std::vector<LossKind> losses{LossKind::bce};
  std::vector<double> pos_weights{1.0};
};

/// Losses match the task: bce / weighted_bce (pos_weight 2, 5, 10) for
/// classification, mse / mae for regression.
SearchSpace default_search_space(Task task);

nlohmann::json to_json(const SearchSpace& space);
/// Missing keys keep the values of \p defaults.
SearchSpace search_space_from_json(const nlohmann::json& j, SearchSpace defaults);

struct TrialConfig {
  ModelSpec spec;
  TrainConfig train;
};

/// Applies one uniform draw from \p space to the base spec and config.
TrialConfig sample_trial(const SearchSpace& space, const ModelSpec& base, const TrainConfig& base_train, Rng& rng);

struct TrialResult {
  std::size_t trial = 0;
  TrialConfig config;
  double metric = 0.0;  // validation metric, NaN when failed
  std::string status;   // "ok" or "failed"
  std::string error;
  std::size_t epochs = 0;
};

struct SearchResult {
  std::vector<TrialResult> trials;  // trial order
  std::vector<std::size_t> ranking;  // trial indices, best first
  std::unique_ptr<Model> best;       // null when every trial failed

  const TrialResult& best_trial() const { return trials.at(ranking.front()); }
};

/// Random search: trial i draws from Rng(derive_seed(seed, i)) and trains
/// with seeds derived from (seed, i). Trials that abort numerically or have
/// an invalid architecture are recorded as failed.
SearchResult hyperparameter_search(const SearchSpace& space, const ModelSpec& base, const TrainConfig& base_train,
                                   const TaskData& train, const TaskData& val, std::size_t n_trials,
                                   std::uint64_t seed,
                                   const std::function<void(const TrialResult&)>& on_trial = {});

/// Ranked JSON array of {trial, spec, train, metric, status}.
nlohmann::json to_json(const SearchResult& result);

}  // namespace stormnet
