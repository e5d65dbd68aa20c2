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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/tensor.hpp"

namespace stormnet {

struct Contingency {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const Contingency&) const = default;
};

/// A prediction is positive when prob >= threshold. Labels must be 0 or 1.
Contingency contingency(std::span<const double> probs, std::span<const double> labels, double threshold);
Contingency contingency(const Tensor& probs, const Tensor& labels, double threshold);

struct Scores {
  double pod = 0.0;
  double sr = 0.0;
  double csi = 0.0;
  double freq_bias = 1.0;
};

/// 0/0 is 0 for pod, sr and csi and 1 for the frequency bias.
Scores scores(const Contingency& c);

struct SweepRow {
  double threshold = 0.0;
  Contingency table;
  Scores scores;
};

struct Sweep {
  std::vector<SweepRow> rows;  // ascending threshold
  double best_threshold = 0.0;  // first threshold with the highest csi
  double best_csi = 0.0;
};

/// Thresholds 0, step, 2 step, ..., 1.
std::vector<double> sweep_thresholds(double step);
Sweep threshold_sweep(std::span<const double> probs, std::span<const double> labels, double step = 0.05);

struct RocPoint {
  double fpr = 0.0;
  double pod = 0.0;
};

struct Roc {
  std::vector<RocPoint> points;  // (0,0) ... (1,1), one point per distinct probability
  double auc = 0.0;
};

/// Trapezoidal AUC with equal probabilities grouped into one step. Throws
/// ConfigError when only one class is present.
Roc roc_auc(std::span<const double> probs, std::span<const double> labels);

struct RegressionMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double r2 = 0.0;
};

/// Throws ConfigError when y has zero variance (r2 undefined).
RegressionMetrics regression_metrics(std::span<const double> y_hat, std::span<const double> y);

enum class EvalMode { image, pixel, image_sum };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(std::string_view name);

struct EvalReport {
  std::string task;
  std::string split;
  EvalMode mode = EvalMode::image;
  std::uint64_t count = 0;  // evaluated population
  bool classification = true;

  Sweep sweep;
  Roc roc;

  RegressionMetrics regression;
  std::vector<double> observed;
  std::vector<double> predicted;

  /// auc for classification, -mae for regression.
  double primary_metric() const { return classification ? roc.auc : -regression.mae; }
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Shortest round-trip decimal form.
std::string format_number(double v);

std::string sweep_csv(const Sweep& sweep);
std::string roc_csv(const Roc& roc);
std::string one_to_one_csv(const EvalReport& report);

/// Writes <prefix>.json plus the sweep and roc (classification) or
/// one-to-one (regression) CSVs next to it.
void write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& prefix);

}  // namespace stormnet
