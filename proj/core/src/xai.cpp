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

#include "stormnet/xai.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stormnet/container.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/metrics.hpp"

namespace stormnet {

namespace {

constexpr std::uint64_t kSampleSalt = 0x5a3;
constexpr std::uint64_t kShuffleSalt = 0x5f1;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::vector<std::size_t>> resolve_groups(const ImportanceConfig& config, std::size_t channels) {
  std::vector<std::vector<std::size_t>> groups = config.groups;
  if (groups.empty())
    for (std::size_t c = 0; c < channels; ++c) groups.push_back({c});
  std::vector<int> seen(channels, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError("importance groups must not be empty");
    for (auto c : g) {
      if (c >= channels) throw ConfigError("importance group names channel " + std::to_string(c) + " of " + std::to_string(channels));
      ++seen[c];
    }
  }
  for (std::size_t c = 0; c < channels; ++c)
    if (seen[c] != 1) throw ConfigError("importance groups must partition the channels; channel " + std::to_string(c) + " is covered " + std::to_string(seen[c]) + " times");
  return groups;
}

}  // namespace

ScoreFn importance_metric(Task task) {
  if (is_classification(task)) {
    return [](const Tensor& p, const Tensor& y) { return roc_auc(p.data(), y.data()).auc; };
  }
  return [](const Tensor& p, const Tensor& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - y[i]);
    return -s / static_cast<double>(p.size());
  };
}

std::string to_string(ImportanceMode mode) { return mode == ImportanceMode::single ? "single" : "multi"; }

std::vector<std::size_t> ImportanceResult::ranking() const {
  std::vector<std::size_t> r(mean.size());
  std::iota(r.begin(), r.end(), std::size_t{0});
  std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  return r;
}

void shuffle_group(Tensor& images, std::span<const std::size_t> group, Rng& rng) {
  if (images.rank() != 4) throw ShapeError("group shuffling expects [N,H,W,C], got " + shape_str(images.shape()));
  const std::size_t n = images.dim(0), c = images.dim(3), pixels = images.dim(1) * images.dim(2);
  std::vector<std::size_t> perm(pixels), order(n);
  std::vector<double> buf(n * pixels);
  for (auto ch : group) {
    for (std::size_t i = 0; i < n; ++i) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      for (std::size_t p = 0; p < pixels; ++p) buf[i * pixels + p] = images[(i * pixels + perm[p]) * c + ch];
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < pixels; ++p) images[(i * pixels + p) * c + ch] = buf[order[i] * pixels + p];
  }
}

ImportanceResult permutation_importance(Model& model, const Tensor& images, const Tensor& targets,
                                        const ScoreFn& metric, const ImportanceConfig& config,
                                        const Featurizer& featurize) {
  if (images.rank() != 4) throw ShapeError("permutation importance expects [N,H,W,C] images");
  const std::size_t n = images.dim(0);
  if (targets.rank() < 1 || targets.dim(0) != n) throw ShapeError("targets do not match the images");
  if (config.n_resamples < 1) throw ConfigError("permutation importance needs at least one resample");
  if (config.sample_size < 1 || config.sample_size > n) {
    throw ConfigError("sample size " + std::to_string(config.sample_size) + " exceeds the " + std::to_string(n) +
                      " available images; lower --sample-size");
  }
  const auto groups = resolve_groups(config, images.dim(3));
  const std::size_t g = groups.size();

  ImportanceResult r;
  r.mode = config.mode;
  r.group_names = config.group_names;
  if (r.group_names.size() != g) {
    r.group_names.clear();
    for (std::size_t i = 0; i < g; ++i) r.group_names.push_back("group" + std::to_string(i));
  }
  r.importance.assign(g, {});

  auto score = [&](const Tensor& x, const Tensor& y) {
    return metric(model.predict(featurize ? featurize(x) : x), y);
  };
  // Shuffle draws depend only on (resample, step, group) so the order groups
  // are listed in does not matter. A group is keyed by its lowest channel,
  // which is unique within a partition.
  auto shuffled = [&](Tensor x, std::span<const std::size_t> group, std::uint64_t resample, std::uint64_t step) {
    const std::uint64_t key = *std::min_element(group.begin(), group.end());
    Rng rng(derive_seed(config.seed, kShuffleSalt, (resample << 40) ^ (step << 20) ^ key));
    shuffle_group(x, group, rng);
    return x;
  };

  std::vector<std::size_t> all(n);
  for (std::size_t s = 0; s < config.n_resamples; ++s) {
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng pick(derive_seed(config.seed, kSampleSalt, s));
    pick.shuffle(std::span<std::size_t>(all));
    const std::span<const std::size_t> rows(all.data(), config.sample_size);
    const Tensor x = take_rows(images, rows);
    const Tensor y = take_rows(targets, rows);
    const double base = score(x, y);
    r.base_scores.push_back(base);

    if (config.mode == ImportanceMode::single) {
      for (std::size_t gi = 0; gi < g; ++gi) r.importance[gi].push_back(base - score(shuffled(x, groups[gi], s, 0), y));
      Tensor everything = x;
      for (std::size_t gi = 0; gi < g; ++gi) everything = shuffled(everything, groups[gi], s, 0);
      r.final_scores.push_back(score(everything, y));
    } else {
      Tensor current = x;
      double current_score = base;
      std::vector<bool> done(g, false);
      std::vector<std::size_t> order;
      std::vector<double> cumulative;
      for (std::size_t step = 0; step < g; ++step) {
        std::size_t worst = g;
        double worst_score = 0.0;
        Tensor worst_x;
        for (std::size_t gi = 0; gi < g; ++gi) {
          if (done[gi]) continue;
          Tensor candidate = shuffled(current, groups[gi], s, step);
          const double sc = score(candidate, y);
          if (worst == g || sc < worst_score) {
            worst = gi;
            worst_score = sc;
            worst_x = std::move(candidate);
          }
        }
        done[worst] = true;
        order.push_back(worst);
        cumulative.push_back(worst_score);
        r.importance[worst].push_back(current_score - worst_score);
        current = std::move(worst_x);
        current_score = worst_score;
      }
      r.final_scores.push_back(current_score);
      r.elimination_orders.push_back(order);
      r.cumulative_scores.push_back(cumulative);
    }
  }

  r.base_score = mean_of(r.base_scores);
  r.final_score = mean_of(r.final_scores);
  for (std::size_t gi = 0; gi < g; ++gi) {
    r.mean.push_back(mean_of(r.importance[gi]));
    r.stddev.push_back(stddev_of(r.importance[gi]));
  }
  if (config.mode == ImportanceMode::multi) {
    std::vector<double> position(g, 0.0);
    r.mean_cumulative_scores.assign(g, 0.0);
    for (std::size_t s = 0; s < r.elimination_orders.size(); ++s)
      for (std::size_t step = 0; step < g; ++step) {
        position[r.elimination_orders[s][step]] += static_cast<double>(step);
        r.mean_cumulative_scores[step] += r.cumulative_scores[s][step] / static_cast<double>(config.n_resamples);
      }
    r.elimination_order.resize(g);
    std::iota(r.elimination_order.begin(), r.elimination_order.end(), std::size_t{0});
    std::stable_sort(r.elimination_order.begin(), r.elimination_order.end(),
                     [&](std::size_t a, std::size_t b) { return position[a] < position[b]; });
  }
  return r;
}

nlohmann::json to_json(const ImportanceResult& r) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["groups"] = r.group_names;
  j["base_score"] = r.base_score;
  j["base_scores"] = r.base_scores;
  j["final_score"] = r.final_score;
  j["final_scores"] = r.final_scores;
  j["mean_importance"] = r.mean;
  j["stddev"] = r.stddev;
  j["importance"] = r.importance;
  std::vector<std::string> ranked;
  for (auto i : r.ranking()) ranked.push_back(r.group_names[i]);
  j["ranking"] = ranked;
  if (r.mode == ImportanceMode::multi) {
    std::vector<std::string> order;
    for (auto i : r.elimination_order) order.push_back(r.group_names[i]);
    j["elimination_order"] = order;
    j["mean_cumulative_scores"] = r.mean_cumulative_scores;
    j["elimination_orders"] = r.elimination_orders;
    j["cumulative_scores"] = r.cumulative_scores;
  }
  return j;
}

std::string importance_csv(const ImportanceResult& r) {
  std::string out = "channel,mean_importance,stddev\n";
  for (std::size_t i = 0; i < r.mean.size(); ++i) {
    out += r.group_names[i] + ',' + format_number(r.mean[i]) + ',' + format_number(r.stddev[i]) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------- attribution

AttributionResult attribute(Model& model, const Tensor& x, const Tensor& background, const AttributionConfig& config) {
  if (model.map_output()) throw ConfigError("attribution needs a scalar-output model");
  if (config.n_steps < 1) throw ConfigError("attribution needs at least one interpolation step");
  const Shape& in = model.spec().input_shape;
  if (x.shape() != in) throw ShapeError("attribution input " + shape_str(x.shape()) + " does not match the model input " + shape_str(in));
  if (background.rank() != in.size() + 1 || background.dim(0) == 0) throw ShapeError("background must be a non-empty batch of inputs");
  const std::size_t nb = background.dim(0), d = x.size();
  for (std::size_t k = 0; k < in.size(); ++k)
    if (background.dim(k + 1) != in[k]) throw ShapeError("background samples do not match the model input");

  const Mode saved = model.mode();
  model.set_mode(Mode::inference);
  Rng rng(config.seed);

  AttributionResult r;
  r.attributions = Tensor(in);
  Shape one = in;
  one.insert(one.begin(), 1);
  r.model_output = model.forward(Tensor(one, std::vector<double>(x.data().begin(), x.data().end())))[0];
  const Tensor bg_out = model.predict(background, config.batch);
  r.expected_value = mean(bg_out);

  const std::size_t batch = std::max<std::size_t>(1, config.batch);
  std::vector<double> grad_sum(d);
  Shape bshape = in;
  for (std::size_t b = 0; b < nb; ++b) {
    const double* base = background.raw() + b * d;
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    for (std::size_t k0 = 0; k0 < config.n_steps; k0 += batch) {
      const std::size_t m = std::min(batch, config.n_steps - k0);
      bshape.insert(bshape.begin(), m);
      Tensor z(bshape);
      bshape.erase(bshape.begin());
      for (std::size_t k = 0; k < m; ++k) {
        const double alpha = (static_cast<double>(k0 + k) + rng.uniform()) / static_cast<double>(config.n_steps);
        for (std::size_t i = 0; i < d; ++i) z[k * d + i] = base[i] + alpha * (x[i] - base[i]);
      }
      model.forward(z);
      const Tensor g = model.backward(Tensor(Shape{m, 1}, 1.0), true);
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < d; ++i) grad_sum[i] += g[k * d + i];
    }
    for (std::size_t i = 0; i < d; ++i) {
      r.attributions[i] += (x[i] - base[i]) * grad_sum[i] / static_cast<double>(config.n_steps);
    }
  }
  for (auto& v : r.attributions.data()) v /= static_cast<double>(nb);
  model.set_mode(saved);

  const std::size_t channels = in.size() >= 3 ? in.back() : 1;
  r.channel_sums.assign(channels, 0.0);
  for (std::size_t i = 0; i < d; ++i) r.channel_sums[i % channels] += r.attributions[i];
  const double total = sum(r.attributions);
  r.completeness_residual = std::abs(total + r.expected_value - r.model_output);
  return r;
}

ChannelRatios aggregate_attributions(std::span<const AttributionResult> results) {
  if (results.empty()) throw ConfigError("aggregation needs at least one attribution");
  const std::size_t c = results.front().channel_sums.size();
  std::vector<double> signed_sum(c, 0.0), abs_sum(c, 0.0);
  for (const auto& r : results) {
    if (r.channel_sums.size() != c) throw ShapeError("attributions disagree on the channel count");
    for (std::size_t i = 0; i < r.attributions.size(); ++i) {
      signed_sum[i % c] += r.attributions[i];
      abs_sum[i % c] += std::abs(r.attributions[i]);
    }
  }
  double st = 0.0, at = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    st += signed_sum[i];
    at += abs_sum[i];
  }
  if (st == 0.0) throw NumericError("signed attribution total is zero; channel ratios are undefined");
  ChannelRatios out;
  for (std::size_t i = 0; i < c; ++i) {
    out.signed_ratio.push_back(signed_sum[i] / st);
    out.absolute_ratio.push_back(at == 0.0 ? 0.0 : abs_sum[i] / at);
  }
  return out;
}

void write_attributions(std::span<const AttributionResult> results, std::span<const std::size_t> sample_index,
                        std::span<const std::string> channel_names, const std::filesystem::path& dir) {
  if (results.empty()) throw ConfigError("no attributions to write");
  Bundle b;
  b.section = "attributions";
  std::vector<double> all;
  for (const auto& r : results) all.insert(all.end(), r.attributions.data().begin(), r.attributions.data().end());
  Shape s = results.front().attributions.shape();
  s.insert(s.begin(), results.size());
  b.arrays.push_back({"attributions", Tensor(s, std::move(all)), DType::f64});
  b.meta["sample_index"] = std::vector<std::size_t>(sample_index.begin(), sample_index.end());
  write_file_atomic(dir / "attributions.bin", encode_bundle(b));

  const ChannelRatios ratios = aggregate_attributions(results);
  nlohmann::json j;
  j["channels"] = std::vector<std::string>(channel_names.begin(), channel_names.end());
  j["signed_ratio"] = ratios.signed_ratio;
  j["absolute_ratio"] = ratios.absolute_ratio;
  auto& samples = j["samples"] = nlohmann::json::array();
  std::string csv = "sample,model_output,expected_value,attribution_sum,completeness_residual\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const double total = sum(r.attributions);
    samples.push_back({{"sample", sample_index[i]},
                       {"channel_sums", r.channel_sums},
                       {"expected_value", r.expected_value},
                       {"model_output", r.model_output},
                       {"completeness_residual", r.completeness_residual}});
    csv += std::to_string(sample_index[i]) + ',' + format_number(r.model_output) + ',' +
           format_number(r.expected_value) + ',' + format_number(total) + ',' + format_number(r.completeness_residual) + '\n';
  }
  write_text_atomic(dir / "channel_sums.json", j.dump(2) + "\n");
  write_text_atomic(dir / "completeness.csv", csv);
}

}  // namespace stormnet
