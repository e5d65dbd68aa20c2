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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/model.hpp"
#include "stormnet/task.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

// ---------------------------------------------------------------- permutation importance

/// Larger is better: score(predictions, targets).
using ScoreFn = std::function<double(const Tensor&, const Tensor&)>;

/// AUC for classification, negative MAE for regression.
ScoreFn importance_metric(Task task);

/// Image batch [N, H, W, C] to model inputs; identity when empty.
using Featurizer = std::function<Tensor(const Tensor&)>;

enum class ImportanceMode { single, multi };

std::string to_string(ImportanceMode mode);

struct ImportanceConfig {
  ImportanceMode mode = ImportanceMode::single;
  std::size_t n_resamples = 30;
  std::size_t sample_size = 250;
  std::uint64_t seed = 0;
  /// Channel groups; one group per channel when empty.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::string> group_names;
};

struct ImportanceResult {
  ImportanceMode mode = ImportanceMode::single;
  std::vector<std::string> group_names;

  std::vector<double> base_scores;  // per resample
  double base_score = 0.0;

  /// [group][resample]. Single pass: base - score with the group shuffled.
  /// Multi pass: the score drop at the step the group was eliminated.
  std::vector<std::vector<double>> importance;
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Multi pass, per resample: groups in elimination order and the score
  /// after each elimination.
  std::vector<std::vector<std::size_t>> elimination_orders;
  std::vector<std::vector<double>> cumulative_scores;
  /// Groups sorted by mean elimination step and mean score after each step.
  std::vector<std::size_t> elimination_order;
  std::vector<double> mean_cumulative_scores;

  /// Score with every group shuffled, per resample and mean.
  std::vector<double> final_scores;
  double final_score = 0.0;

  /// Groups by decreasing mean importance.
  std::vector<std::size_t> ranking() const;
};

/// Shuffles the channels of \p group in place: pixel positions within each
/// image first, then the order of images, each channel on its own draw.
void shuffle_group(Tensor& images, std::span<const std::size_t> group, Rng& rng);

/// Backward permutation importance over channel groups. Each resample draws
/// sample_size images without replacement.
ImportanceResult permutation_importance(Model& model, const Tensor& images, const Tensor& targets,
                                        const ScoreFn& metric, const ImportanceConfig& config,
                                        const Featurizer& featurize = {});

nlohmann::json to_json(const ImportanceResult& result);
/// channel,mean_importance,stddev
std::string importance_csv(const ImportanceResult& result);

// ---------------------------------------------------------------- attribution

struct AttributionConfig {
  std::size_t n_steps = 64;
  std::uint64_t seed = 0;
  std::size_t batch = 64;
};

struct AttributionResult {
  Tensor attributions;  // same shape as one input
  std::vector<double> channel_sums;
  double expected_value = 0.0;  // mean model output over the background
  double model_output = 0.0;
  double completeness_residual = 0.0;  // |sum + expected_value - model_output|
};

/// Expected-gradients attribution of a scalar-output model at \p x against
/// \p background [B, ...]. For each background sample, n_steps interpolation
/// points use a stratified jittered grid alpha_k = (k + u_k) / n_steps.
AttributionResult attribute(Model& model, const Tensor& x, const Tensor& background, const AttributionConfig& config);

struct ChannelRatios {
  std::vector<double> signed_ratio;    // sum per channel / total sum
  std::vector<double> absolute_ratio;  // sum of |a| per channel / total
};

/// Throws NumericError when the signed total is zero.
ChannelRatios aggregate_attributions(std::span<const AttributionResult> results);

/// attributions.bin (bundle), channel_sums.json and completeness.csv.
void write_attributions(std::span<const AttributionResult> results, std::span<const std::size_t> sample_index,
                        std::span<const std::string> channel_names, const std::filesystem::path& dir);

}  // namespace stormnet
