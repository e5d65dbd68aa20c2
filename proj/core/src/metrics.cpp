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

#include "stormnet/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "stormnet/container.hpp"
#include "stormnet/errors.hpp"

namespace stormnet {

namespace {

void check_pairs(std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError("predictions and labels differ in length: " + std::to_string(a) + " vs " + std::to_string(b));
}

bool label_of(double v) {
  if (v == 1.0) return true;
  if (v == 0.0) return false;
  throw ConfigError("labels must be 0 or 1, got " + format_number(v));
}

double ratio(double num, double den, double zero_case) { return den == 0.0 ? zero_case : num / den; }

}  // namespace

Contingency contingency(std::span<const double> probs, std::span<const double> labels, double threshold) {
  check_pairs(probs.size(), labels.size());
  Contingency c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool y = label_of(labels[i]);
    const bool p = probs[i] >= threshold;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Contingency contingency(const Tensor& probs, const Tensor& labels, double threshold) {
  if (probs.shape() != labels.shape()) {
    throw ShapeError("contingency: " + shape_str(probs.shape()) + " vs " + shape_str(labels.shape()));
  }
  return contingency(probs.data(), labels.data(), threshold);
}

Scores scores(const Contingency& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Scores s;
  s.pod = ratio(tp, tp + fn, 0.0);
  s.sr = ratio(tp, tp + fp, 0.0);
  s.csi = ratio(tp, tp + fp + fn, 0.0);
  s.freq_bias = ratio(tp + fp, tp + fn, 1.0);
  return s;
}

std::vector<double> sweep_thresholds(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("sweep step must be in (0, 1]");
  const auto n = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  std::vector<double> t;
  for (std::size_t i = 0; i <= n; ++i) t.push_back(std::min(1.0, static_cast<double>(i) * step));
  if (t.back() < 1.0) t.push_back(1.0);
  return t;
}

Sweep threshold_sweep(std::span<const double> probs, std::span<const double> labels, double step) {
  check_pairs(probs.size(), labels.size());
  const auto thresholds = sweep_thresholds(step);
  // Sorting once turns every table into two binary searches.
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < probs.size(); ++i) (label_of(labels[i]) ? pos : neg).push_back(probs[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_least = [](const std::vector<double>& v, double t) {
    return static_cast<std::uint64_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
  };
  Sweep s;
  s.best_csi = -1.0;
  for (double t : thresholds) {
    SweepRow r;
    r.threshold = t;
    r.table.tp = at_least(pos, t);
    r.table.fn = pos.size() - r.table.tp;
    r.table.fp = at_least(neg, t);
    r.table.tn = neg.size() - r.table.fp;
    r.scores = scores(r.table);
    if (r.scores.csi > s.best_csi) {
      s.best_csi = r.scores.csi;
      s.best_threshold = t;
    }
    s.rows.push_back(r);
  }
  return s;
}

Roc roc_auc(std::span<const double> probs, std::span<const double> labels) {
  check_pairs(probs.size(), labels.size());
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) n_pos += label_of(labels[i]);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("ROC needs both classes present");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  Roc roc;
  roc.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double p = probs[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && probs[order[i]] == p; ++i) (labels[order[i]] == 1.0 ? tp : fp) += 1;
    // Trapezoid in count units, normalized once at the end.
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) * 0.5;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  roc.auc = area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return roc;
}

RegressionMetrics regression_metrics(std::span<const double> y_hat, std::span<const double> y) {
  check_pairs(y_hat.size(), y.size());
  if (y.size() < 2) throw ConfigError("regression metrics need at least two samples");
  const double n = static_cast<double>(y.size());
  double abs_sum = 0.0, sq_sum = 0.0, err_sum = 0.0, y_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y_hat[i] - y[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    err_sum += e;
    y_sum += y[i];
  }
  const double y_mean = y_sum / n;
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - y_mean) * (v - y_mean);
  if (ss_tot == 0.0) throw ConfigError("r2 is undefined for targets with zero variance");
  return {abs_sum / n, std::sqrt(sq_sum / n), err_sum / n, 1.0 - sq_sum / ss_tot};
}

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::image: return "image";
    case EvalMode::pixel: return "pixel";
    case EvalMode::image_sum: return "image_sum";
  }
  return "?";
}

EvalMode eval_mode_from_string(std::string_view name) {
  if (name == "image") return EvalMode::image;
  if (name == "pixel") return EvalMode::pixel;
  if (name == "image_sum") return EvalMode::image_sum;
  throw ConfigError("unknown evaluation mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- serialization

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["task"] = r.task;
  j["split"] = r.split;
  j["mode"] = to_string(r.mode);
  j["count"] = r.count;
  j["classification"] = r.classification;
  if (r.classification) {
    auto& sw = j["sweep"];
    sw["best_threshold"] = r.sweep.best_threshold;
    sw["best_csi"] = r.sweep.best_csi;
    sw["rows"] = nlohmann::json::array();
    for (const auto& row : r.sweep.rows) {
      sw["rows"].push_back({{"threshold", row.threshold},
                            {"tp", row.table.tp},
                            {"fp", row.table.fp},
                            {"fn", row.table.fn},
                            {"tn", row.table.tn},
                            {"pod", row.scores.pod},
                            {"sr", row.scores.sr},
                            {"csi", row.scores.csi},
                            {"freq_bias", row.scores.freq_bias}});
    }
    j["auc"] = r.roc.auc;
    j["roc"] = nlohmann::json::array();
    for (const auto& p : r.roc.points) j["roc"].push_back({p.fpr, p.pod});
  } else {
    j["regression"] = {{"mae", r.regression.mae},
                       {"rmse", r.regression.rmse},
                       {"bias", r.regression.bias},
                       {"r2", r.regression.r2}};
    j["observed"] = r.observed;
    j["predicted"] = r.predicted;
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.mode = eval_mode_from_string(j.at("mode").get<std::string>());
    r.count = j.at("count").get<std::uint64_t>();
    r.classification = j.at("classification").get<bool>();
    if (r.classification) {
      const auto& sw = j.at("sweep");
      r.sweep.best_threshold = sw.at("best_threshold").get<double>();
      r.sweep.best_csi = sw.at("best_csi").get<double>();
      for (const auto& row : sw.at("rows")) {
        SweepRow s;
        s.threshold = row.at("threshold").get<double>();
        s.table = {row.at("tp").get<std::uint64_t>(), row.at("fp").get<std::uint64_t>(),
                   row.at("fn").get<std::uint64_t>(), row.at("tn").get<std::uint64_t>()};
        s.scores = {row.at("pod").get<double>(), row.at("sr").get<double>(), row.at("csi").get<double>(),
                    row.at("freq_bias").get<double>()};
        r.sweep.rows.push_back(s);
      }
      r.roc.auc = j.at("auc").get<double>();
      for (const auto& p : j.at("roc")) r.roc.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    } else {
      const auto& m = j.at("regression");
      r.regression = {m.at("mae").get<double>(), m.at("rmse").get<double>(), m.at("bias").get<double>(),
                      m.at("r2").get<double>()};
      r.observed = j.at("observed").get<std::vector<double>>();
      r.predicted = j.at("predicted").get<std::vector<double>>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string sweep_csv(const Sweep& sweep) {
  std::string out = "threshold,pod,sr,csi,freq_bias\n";
  for (const auto& r : sweep.rows) {
    out += format_number(r.threshold) + ',' + format_number(r.scores.pod) + ',' + format_number(r.scores.sr) + ',' +
           format_number(r.scores.csi) + ',' + format_number(r.scores.freq_bias) + '\n';
  }
  return out;
}

std::string roc_csv(const Roc& roc) {
  std::string out = "fpr,pod\n";
  for (const auto& p : roc.points) out += format_number(p.fpr) + ',' + format_number(p.pod) + '\n';
  return out;
}

std::string one_to_one_csv(const EvalReport& report) {
  std::string out = "observed,predicted\n";
  for (std::size_t i = 0; i < report.observed.size(); ++i) {
    out += format_number(report.observed[i]) + ',' + format_number(report.predicted[i]) + '\n';
  }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& prefix) {
  write_text_atomic(dir / (prefix + ".json"), to_json(report).dump(2) + "\n");
  if (report.classification) {
    write_text_atomic(dir / (prefix + "_sweep.csv"), sweep_csv(report.sweep));
    write_text_atomic(dir / (prefix + "_roc.csv"), roc_csv(report.roc));
  } else {
    write_text_atomic(dir / (prefix + "_one_to_one.csv"), one_to_one_csv(report));
  }
}

}  // namespace stormnet
