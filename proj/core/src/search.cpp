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

#include "stormnet/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stormnet/errors.hpp"
#include "stormnet/evaluate.hpp"

namespace stormnet {

namespace {

template <typename T>
T pick(const std::vector<T>& values, Rng& rng, const char* what) {
  if (values.empty()) throw ConfigError(std::string("search space has no values for ") + what);
  return values[static_cast<std::size_t>(rng.below(values.size()))];
}

template <typename T>
void read_list(const nlohmann::json& j, const char* key, std::vector<T>& out) {
  if (j.contains(key)) out = j.at(key).get<std::vector<T>>();
}

}  // namespace

SearchSpace default_search_space(Task task) {
  SearchSpace s;
  if (is_classification(task)) {
    s.losses = {LossKind::bce, LossKind::weighted_bce};
    s.pos_weights = {2.0, 5.0, 10.0};
  } else {
    s.losses = {LossKind::mse, LossKind::mae};
  }
  return s;
}

nlohmann::json to_json(const SearchSpace& s) {
  std::vector<std::string> losses;
  for (auto l : s.losses) losses.push_back(to_string(l));
  return {{"n_layers", s.n_layers},
          {"widths", s.widths},
          {"base_filters", s.base_filters},
          {"learning_rates", s.learning_rates},
          {"batch_sizes", s.batch_sizes},
          {"dropout_rates", s.dropout_rates},
          {"batchnorm", s.batchnorm},
          {"losses", losses},
          {"pos_weights", s.pos_weights}};
}

SearchSpace search_space_from_json(const nlohmann::json& j, SearchSpace s) {
  try {
    read_list(j, "n_layers", s.n_layers);
    read_list(j, "widths", s.widths);
    read_list(j, "base_filters", s.base_filters);
    read_list(j, "learning_rates", s.learning_rates);
    read_list(j, "batch_sizes", s.batch_sizes);
    read_list(j, "dropout_rates", s.dropout_rates);
    read_list(j, "batchnorm", s.batchnorm);
    read_list(j, "pos_weights", s.pos_weights);
    if (j.contains("losses")) {
      s.losses.clear();
      for (const auto& l : j.at("losses")) s.losses.push_back(loss_from_string(l.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad search space: ") + e.what());
  }
  return s;
}

TrialConfig sample_trial(const SearchSpace& space, const ModelSpec& base, const TrainConfig& base_train, Rng& rng) {
  // Every list is drawn in a fixed order so the trial sequence does not
  // depend on the model kind.
  const std::size_t layers = pick(space.n_layers, rng, "n_layers");
  const std::size_t width = pick(space.widths, rng, "widths");
  const std::size_t filters = pick(space.base_filters, rng, "base_filters");
  const double lr = pick(space.learning_rates, rng, "learning_rates");
  const std::size_t batch = pick(space.batch_sizes, rng, "batch_sizes");
  const double dropout = pick(space.dropout_rates, rng, "dropout_rates");
  const bool bn = pick(space.batchnorm, rng, "batchnorm");
  const LossKind loss = pick(space.losses, rng, "losses");
  const double pos_weight = pick(space.pos_weights, rng, "pos_weights");

  TrialConfig t{base, base_train};
  t.train.optimizer.learning_rate = lr;
  t.train.batch_size = batch;
  t.train.loss = {loss, loss == LossKind::weighted_bce ? pos_weight : 1.0};
  switch (base.kind) {
    case ModelKind::perceptron:
      break;
    case ModelKind::mlp:
      t.spec.hidden_layers.assign(layers, width);
      t.spec.dropout_rate = dropout;
      t.spec.use_batchnorm = bn;
      break;
    case ModelKind::cnn:
      t.spec.conv_blocks.clear();
      for (std::size_t i = 0; i < layers; ++i) t.spec.conv_blocks.push_back({filters << i, 1});
      t.spec.hidden_layers = {width};
      t.spec.dropout_rate = dropout;
      t.spec.use_batchnorm = bn;
      break;
    case ModelKind::unet:
      t.spec.depth = layers;
      t.spec.base_filters = filters;
      t.spec.dropout_rate = dropout;
      t.spec.use_batchnorm = bn;
      break;
  }
  return t;
}

SearchResult hyperparameter_search(const SearchSpace& space, const ModelSpec& base, const TrainConfig& base_train,
                                   const TaskData& train_data, const TaskData& val, std::size_t n_trials,
                                   std::uint64_t seed, const std::function<void(const TrialResult&)>& on_trial) {
  if (n_trials < 1) throw ConfigError("a search needs at least one trial");
  if (val.size() == 0) throw ConfigError("a search needs validation data to rank trials");
  SearchResult result;
  double best_metric = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_trials; ++i) {
    Rng rng(derive_seed(seed, i));
    TrialResult r;
    r.trial = i;
    r.config = sample_trial(space, base, base_train, rng);
    r.config.spec.seed = derive_seed(seed, i, 1);
    r.config.train.seed = derive_seed(seed, i, 2);
    try {
      Model model(r.config.spec);
      const TrainLog log = train(model, train_data, val, r.config.train);
      r.epochs = log.epochs.size();
      r.metric = validation_metric(val.task, model.predict(val.inputs), val.targets);
      r.status = "ok";
      if (std::isfinite(r.metric) && (!result.best || r.metric > best_metric)) {
        best_metric = r.metric;
        result.best = std::make_unique<Model>(std::move(model));
      }
    } catch (const NumericError& e) {
      r.status = "failed";
      r.error = e.what();
      r.metric = std::numeric_limits<double>::quiet_NaN();
    } catch (const ConfigError& e) {
      r.status = "failed";
      r.error = e.what();
      r.metric = std::numeric_limits<double>::quiet_NaN();
    }
    if (on_trial) on_trial(r);
    result.trials.push_back(std::move(r));
  }
  result.ranking.resize(result.trials.size());
  std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
  auto usable = [&](std::size_t i) { return std::isfinite(result.trials[i].metric); };
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    if (usable(a) != usable(b)) return usable(a);
    return usable(a) && result.trials[a].metric > result.trials[b].metric;
  });
  return result;
}

nlohmann::json to_json(const SearchResult& result) {
  auto out = nlohmann::json::array();
  for (std::size_t rank = 0; rank < result.ranking.size(); ++rank) {
    const auto& t = result.trials[result.ranking[rank]];
    nlohmann::json j;
    j["rank"] = rank + 1;
    j["trial"] = t.trial;
    j["spec"] = to_json(t.config.spec);
    j["train"] = to_json(t.config.train);
    j["metric"] = std::isfinite(t.metric) ? nlohmann::json(t.metric) : nlohmann::json(nullptr);
    j["status"] = t.status;
    j["epochs"] = t.epochs;
    if (!t.error.empty()) j["error"] = t.error;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace stormnet
