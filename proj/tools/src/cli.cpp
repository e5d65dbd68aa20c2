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

#include "stormnet/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/container.hpp"
#include "stormnet/data.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/evaluate.hpp"
#include "stormnet/metrics.hpp"
#include "stormnet/model.hpp"
#include "stormnet/search.hpp"
#include "stormnet/task.hpp"
#include "stormnet/train.hpp"
#include "stormnet/xai.hpp"

namespace stormnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelFile = "model.stormnet";
constexpr const char* kBestModelFile = "best_model.stormnet";

// ---------------------------------------------------------------- config files

std::string dashed(std::string key) {
  for (auto& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

std::vector<std::string> as_args(const json& v) {
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      const auto one = as_args(e);
      out.insert(out.end(), one.begin(), one.end());
    }
    return out;
  }
  if (v.is_string()) return {v.get<std::string>()};
  if (v.is_boolean()) return {v.get<bool>() ? "true" : "false"};
  if (v.is_number()) return {v.dump()};
  throw ConfigError("config value " + v.dump() + " is not a scalar or list");
}

/// Fills options that were not given on the command line from a flat JSON
/// object whose keys are option names. Keys listed in \p passthrough are
/// returned instead of applied.
json apply_config_file(CLI::App& cmd, const std::string& path, const std::vector<std::string>& passthrough = {}) {
  json extra = json::object();
  if (path.empty()) return extra;
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(passthrough.begin(), passthrough.end(), key) != passthrough.end()) {
      extra[key] = value;
      continue;
    }
    if (key == "command") continue;
    CLI::Option* opt = cmd.get_option_no_throw("--" + dashed(key));
    if (!opt || key == "config") throw ConfigError("config file " + path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_array() && value.empty()) continue;  // an unset list keeps its default
    opt->add_result(as_args(value));
    opt->run_callback();
  }
  return extra;
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() > 0) return value;
  if (const char* env = std::getenv("STORMNET_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto s = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return s;
    } catch (const std::exception&) {
      throw ConfigError(std::string("STORMNET_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::vector<std::string> channel_names(const DatasetReader& reader) {
  std::vector<std::string> names;
  if (reader.manifest().contains("channels")) names = reader.manifest().at("channels").get<std::vector<std::string>>();
  return names;
}

// ---------------------------------------------------------------- models and tasks

struct ModelChoice {
  ModelKind kind;
  InputKind input;
};

const std::map<std::string, ModelChoice>& model_choices() {
  static const std::map<std::string, ModelChoice> m = {
      {"perceptron", {ModelKind::perceptron, InputKind::engineered}},
      {"mlp_eng", {ModelKind::mlp, InputKind::engineered}},
      {"mlp_pix", {ModelKind::mlp, InputKind::image}},
      {"cnn", {ModelKind::cnn, InputKind::image}},
      {"unet", {ModelKind::unet, InputKind::image}},
  };
  return m;
}

void check_compatible(const std::string& model, Task task) {
  const bool unet = model == "unet";
  if (unet && !is_segmentation(task)) {
    throw ConfigError("model unet predicts maps; use --task seg_cls or seg_reg (image-level tasks need a scalar model)");
  }
  if (!unet && is_segmentation(task)) {
    throw ConfigError("task " + to_string(task) + " needs per-pixel output; use --model unet");
  }
}

Task task_of(const ModelSpec& spec) {
  switch (spec.output) {
    case OutputKind::sigmoid_scalar: return Task::cls;
    case OutputKind::linear_scalar: return Task::reg;
    case OutputKind::sigmoid_map: return Task::seg_cls;
    case OutputKind::linear_map: return Task::seg_reg;
  }
  return Task::cls;
}

InputKind input_of(const ModelSpec& spec) { return spec.input_shape.size() == 1 ? InputKind::engineered : InputKind::image; }

Split first_n(const Split& s, std::size_t n) {
  if (n == 0 || n >= s.size()) return s;
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return s.subset(rows);
}

// ---------------------------------------------------------------- shared training flags

struct TrainOptions {
  std::string data, model, task, config, out;
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string loss;
  double pos_weight = 1.0;
  std::size_t patience = 5;
  double plateau_eps = 1e-6;
  bool augment = false;
  bool eval_every_epoch = true;
  double dropout = 0.0;
  bool batchnorm = false;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> filters;
  std::size_t depth = 3;
  std::size_t base_filters = 8;
  std::string activation = "relu";
  std::string pool = "max";
  std::size_t train_limit = 0;
  std::size_t val_limit = 0;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* hidden_opt = nullptr;
  CLI::Option* filters_opt = nullptr;
};

void add_train_flags(CLI::App& cmd, TrainOptions& o) {
  std::vector<std::string> models;
  for (const auto& [name, _] : model_choices()) models.push_back(name);
  cmd.add_option("--data", o.data, "Dataset directory");
  cmd.add_option("--model", o.model, "Model family")->check(CLI::IsMember(models));
  cmd.add_option("--task", o.task, "Prediction task")->check(CLI::IsMember({"cls", "reg", "seg_cls", "seg_reg"}));
  cmd.add_option("--config", o.config, "JSON file of option values; flags take precedence");
  cmd.add_option("--out", o.out, "Output directory");
  o.seed_opt = cmd.add_option("--seed", o.seed, "Seed (default: STORMNET_SEED or 0)");
  cmd.add_option("--epochs", o.epochs, "Maximum epochs");
  cmd.add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd.add_option("--lr", o.lr, "Learning rate");
  cmd.add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"sgd", "adam", "rmsprop"}));
  cmd.add_option("--loss", o.loss, "Loss (default: bce or mse by task)")
      ->check(CLI::IsMember({"bce", "cce", "mse", "mae", "weighted_bce"}));
  cmd.add_option("--pos-weight", o.pos_weight, "Positive-class weight of weighted_bce");
  cmd.add_option("--patience", o.patience, "Plateau epochs before stopping");
  cmd.add_option("--plateau-eps", o.plateau_eps, "Validation-loss change counted as a plateau");
  cmd.add_flag("--augment", o.augment, "Random rotations, flips and noise");
  cmd.add_flag("--eval-every-epoch,!--no-eval-every-epoch", o.eval_every_epoch, "Validation metric every epoch");
  cmd.add_option("--dropout", o.dropout, "Dropout rate");
  cmd.add_flag("--batchnorm", o.batchnorm, "Batch normalization after hidden layers");
  o.hidden_opt = cmd.add_option("--hidden", o.hidden, "Dense widths (mlp) or dense head (cnn)")->delimiter(',');
  o.filters_opt = cmd.add_option("--filters", o.filters, "Filters per conv block (cnn)")->delimiter(',');
  cmd.add_option("--depth", o.depth, "U-Net depth");
  cmd.add_option("--base-filters", o.base_filters, "U-Net first-level filters");
  cmd.add_option("--activation", o.activation)->check(CLI::IsMember({"relu", "sigmoid", "linear", "softplus"}));
  cmd.add_option("--pool", o.pool)->check(CLI::IsMember({"max", "average"}));
  cmd.add_option("--train-limit", o.train_limit, "Use only the first N training samples (0: all)");
  cmd.add_option("--val-limit", o.val_limit, "Use only the first N validation samples (0: all)");
}

void check_train_options(TrainOptions& o) {
  require(o.data, "--data");
  require(o.model, "--model");
  require(o.task, "--task");
  require(o.out, "--out");
  o.seed = resolve_seed(o.seed_opt, o.seed);
  check_compatible(o.model, task_from_string(o.task));
  if (o.loss.empty()) o.loss = to_string(default_loss(task_from_string(o.task)).kind);
}

json to_json(const TrainOptions& o) {
  return {{"data", o.data},
          {"model", o.model},
          {"task", o.task},
          {"out", o.out},
          {"seed", o.seed},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"lr", o.lr},
          {"optimizer", o.optimizer},
          {"loss", o.loss},
          {"pos_weight", o.pos_weight},
          {"patience", o.patience},
          {"plateau_eps", o.plateau_eps},
          {"augment", o.augment},
          {"eval_every_epoch", o.eval_every_epoch},
          {"dropout", o.dropout},
          {"batchnorm", o.batchnorm},
          {"hidden", o.hidden},
          {"filters", o.filters},
          {"depth", o.depth},
          {"base_filters", o.base_filters},
          {"activation", o.activation},
          {"pool", o.pool},
          {"train_limit", o.train_limit},
          {"val_limit", o.val_limit}};
}

ModelSpec build_spec(const TrainOptions& o, const Shape& input_shape) {
  const auto& choice = model_choices().at(o.model);
  const Task task = task_from_string(o.task);
  ModelSpec s = default_spec(choice.kind, input_shape, output_for(task));
  s.seed = derive_seed(o.seed, 0x5bec);
  s.dropout_rate = o.dropout;
  s.use_batchnorm = o.batchnorm;
  s.activation = activation_from_string(o.activation);
  s.pool = o.pool == "max" ? PoolMode::max : PoolMode::average;
  if (o.hidden_opt->count() > 0) s.hidden_layers = o.hidden;
  if (o.filters_opt->count() > 0) {
    s.conv_blocks.clear();
    for (auto f : o.filters) s.conv_blocks.push_back({f, 1});
  }
  s.depth = o.depth;
  s.base_filters = o.base_filters;
  if (choice.kind == ModelKind::perceptron) s.hidden_layers.clear();
  validate(s);
  return s;
}

TrainConfig build_train_config(const TrainOptions& o) {
  TrainConfig c;
  c.batch_size = o.batch_size;
  c.max_epochs = o.epochs;
  c.optimizer.kind = optimizer_from_string(o.optimizer);
  c.optimizer.learning_rate = o.lr;
  c.loss = Loss{loss_from_string(o.loss), o.pos_weight};
  c.plateau_eps = o.plateau_eps;
  c.patience = o.patience;
  c.augment = o.augment;
  c.seed = derive_seed(o.seed, 0x7a1);
  c.eval_every_epoch = o.eval_every_epoch;
  validate(c);
  return c;
}

struct PreparedData {
  TaskData train, val;
  std::size_t train_total = 0;
};

PreparedData prepare(const TrainOptions& o) {
  const auto& choice = model_choices().at(o.model);
  const Task task = task_from_string(o.task);
  DatasetReader reader(o.data);
  PreparedData p;
  const Split train = first_n(reader.load_split("train"), o.train_limit);
  const Split val = first_n(reader.load_split("val"), o.val_limit);
  p.train_total = train.size();
  p.train = make_task_data(train, task, choice.input);
  p.val = make_task_data(val, task, choice.input);
  return p;
}

// ---------------------------------------------------------------- commands

struct GenerateOptions {
  std::uint64_t seed = 0;
  std::string out, config;
  std::size_t train = 2000, val = 400, test = 400;
  double pos_rate = 0.01;
  CLI::Option* seed_opt = nullptr;
};

int cmd_generate(GenerateOptions& o, CLI::App& cmd, std::ostream& out) {
  apply_config_file(cmd, o.config);
  require(o.out, "--out");
  if (o.train < 1 || o.val < 1 || o.test < 1) throw ConfigError("--train, --val and --test must each be at least 1");
  o.seed = resolve_seed(o.seed_opt, o.seed);
  GeneratorConfig g;
  g.seed = o.seed;
  g.n_train = o.train;
  g.n_val = o.val;
  g.n_test = o.test;
  g.pos_rate_target = o.pos_rate;
  const Dataset d = generate(g);
  write_dataset(d, o.out);
  write_json(fs::path(o.out) / "resolved_config.json",
             {{"command", "generate"},
              {"seed", o.seed},
              {"out", o.out},
              {"train", o.train},
              {"val", o.val},
              {"test", o.test},
              {"pos_rate", o.pos_rate}});
  out << "train " << d.train.size() << " val " << d.val.size() << " test " << d.test.size() << "\n";
  out << "pixel-positive rate train " << format_number(d.train.positive_pixel_fraction()) << " val "
      << format_number(d.val.positive_pixel_fraction()) << " test " << format_number(d.test.positive_pixel_fraction())
      << " (target " << format_number(o.pos_rate) << ")\n";
  return kOk;
}

int cmd_train(TrainOptions& o, CLI::App& cmd, std::ostream& out) {
  apply_config_file(cmd, o.config);
  check_train_options(o);
  const PreparedData data = prepare(o);
  const Task task = task_from_string(o.task);
  Model model(build_spec(o, data.train.input_shape()));
  const TrainConfig tc = build_train_config(o);
  make_dir(o.out);
  write_json(fs::path(o.out) / "resolved_config.json", [&] {
    json j = to_json(o);
    j["command"] = "train";
    return j;
  }());

  out << "training " << o.model << " on " << data.train.size() << " samples";
  if (data.train.size() != data.train_total) {
    out << " (" << data.train_total - data.train.size() << " zero-flash images excluded)";
  }
  out << ", " << model.num_parameters() << " parameters\n";

  Trainer trainer(model, tc);
  trainer.on_epoch = [&](const EpochLog& e) {
    out << "epoch " << e.epoch << " train_loss " << format_number(e.train_loss) << " val_loss "
        << format_number(e.val_loss) << " val_metric " << format_number(e.val_metric) << "\n";
  };
  trainer.fit(data.train, data.val);
  Model& trained = trainer.model();

  save_model(trained, fs::path(o.out) / kModelFile);
  write_text_atomic(fs::path(o.out) / "train_log.csv", trainer.log().csv());
  EvalReport report = evaluate(trained, data.val, default_mode(trained));
  report.split = "val";
  write_report(report, o.out, "eval_val");
  write_json(fs::path(o.out) / "train_summary.json",
             {{"task", to_string(task)},
              {"model", o.model},
              {"train_samples", data.train.size()},
              {"excluded_zero_flash", data.train_total - data.train.size()},
              {"val_samples", data.val.size()},
              {"epochs", trainer.log().epochs.size()},
              {"stop_reason", to_string(trainer.log().stop)},
              {"parameters", trained.num_parameters()},
              {"val_metric", validation_metric(task, trained.predict(data.val.inputs), data.val.targets)}});
  out << "stopped (" << to_string(trainer.log().stop) << ") after " << trainer.log().epochs.size() << " epochs; ";
  out << (report.classification ? "val auc " + format_number(report.roc.auc)
                                 : "val mae " + format_number(report.regression.mae))
      << "\n";
  return kOk;
}

int cmd_search(TrainOptions& o, std::size_t trials, CLI::App& cmd, std::ostream& out) {
  const json extra = apply_config_file(cmd, o.config, {"space"});
  check_train_options(o);
  if (trials < 1) throw ConfigError("--trials must be at least 1");
  const PreparedData data = prepare(o);
  const Task task = task_from_string(o.task);
  const ModelSpec base = build_spec(o, data.train.input_shape());
  const TrainConfig tc = build_train_config(o);
  SearchSpace space = default_search_space(task);
  if (extra.contains("space")) space = search_space_from_json(extra.at("space"), space);
  make_dir(o.out);
  write_json(fs::path(o.out) / "resolved_config.json", [&] {
    json j = to_json(o);
    j["command"] = "search";
    j["trials"] = trials;
    j["space"] = to_json(space);
    return j;
  }());

  const SearchResult result = hyperparameter_search(space, base, tc, data.train, data.val, trials, o.seed,
                                                    [&](const TrialResult& t) {
                                                      out << "trial " << t.trial << " " << t.status << " metric "
                                                          << format_number(t.metric) << "\n";
                                                    });
  write_json(fs::path(o.out) / "search.json", to_json(result));
  if (!result.best) throw NumericError("every search trial failed");
  save_model(*result.best, fs::path(o.out) / kBestModelFile);
  const auto& best = result.best_trial();
  out << "best trial " << best.trial << " metric " << format_number(best.metric) << "\n";
  return kOk;
}

struct EvalOptions {
  std::string model, data, split = "val", mode, out, config;
  double sweep_step = 0.05;
};

int cmd_eval(EvalOptions& o, CLI::App& cmd, std::ostream& out) {
  apply_config_file(cmd, o.config);
  require(o.model, "--model");
  require(o.data, "--data");
  require(o.out, "--out");
  Model model = load_model(o.model);
  const EvalMode mode = o.mode.empty() ? default_mode(model) : eval_mode_from_string(o.mode);
  if (model.map_output() && mode == EvalMode::image) {
    throw ConfigError("map-output models are evaluated with --mode pixel or image_sum");
  }
  if (!model.map_output() && mode != EvalMode::image) throw ConfigError("scalar-output models use --mode image");
  DatasetReader reader(o.data);
  const TaskData data = make_task_data(reader.load_split(o.split), task_of(model.spec()), input_of(model.spec()));
  EvalReport report = evaluate(model, data, mode, o.sweep_step);
  report.split = o.split;
  make_dir(o.out);
  write_report(report, o.out, "eval_" + o.split);
  write_json(fs::path(o.out) / "resolved_config.json", {{"command", "eval"},
                                                         {"model", o.model},
                                                         {"data", o.data},
                                                         {"split", o.split},
                                                         {"mode", to_string(mode)},
                                                         {"sweep_step", o.sweep_step},
                                                         {"out", o.out}});
  out << "evaluated " << report.count << " cases (" << to_string(mode) << ") on " << o.split << ": ";
  out << (report.classification ? "auc " + format_number(report.roc.auc) + " best csi " +
                                      format_number(report.sweep.best_csi) + " at threshold " +
                                      format_number(report.sweep.best_threshold)
                                : "mae " + format_number(report.regression.mae) + " rmse " +
                                      format_number(report.regression.rmse))
      << "\n";
  return kOk;
}

struct ExplainOptions {
  std::string model, data, split = "val", method, mode = "single", out, config;
  std::size_t resamples = 30, sample_size = 250, steps = 64, background = 16, samples = 10;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_explain(ExplainOptions& o, CLI::App& cmd, std::ostream& out) {
  apply_config_file(cmd, o.config);
  require(o.model, "--model");
  require(o.data, "--data");
  require(o.method, "--method");
  require(o.out, "--out");
  o.seed = resolve_seed(o.seed_opt, o.seed);
  Model model = load_model(o.model);
  const Task task = task_of(model.spec());
  const InputKind input = input_of(model.spec());
  DatasetReader reader(o.data);
  const Split split = reader.load_split(o.split);
  const TaskData images = make_task_data(split, task, InputKind::image);
  auto names = channel_names(reader);
  if (names.size() != images.inputs.dim(3)) {
    names.clear();
    for (std::size_t c = 0; c < images.inputs.dim(3); ++c) names.push_back("channel" + std::to_string(c));
  }
  make_dir(o.out);

  json resolved = {{"command", "explain"}, {"model", o.model},   {"data", o.data},     {"split", o.split},
                   {"method", o.method},   {"out", o.out},       {"seed", o.seed}};
  if (o.method == "perm") {
    ImportanceConfig ic;
    ic.mode = o.mode == "multi" ? ImportanceMode::multi : ImportanceMode::single;
    ic.n_resamples = o.resamples;
    ic.sample_size = o.sample_size;
    ic.seed = o.seed;
    ic.group_names = names;
    if (o.sample_size > images.size()) {
      throw ConfigError("split " + o.split + " has " + std::to_string(images.size()) +
                        " usable images, fewer than the sample size " + std::to_string(o.sample_size) +
                        "; lower --sample-size");
    }
    Featurizer featurize;
    if (input == InputKind::engineered) featurize = engineered_features;
    const ImportanceResult r =
        permutation_importance(model, images.inputs, images.targets, importance_metric(task), ic, featurize);
    write_json(fs::path(o.out) / "importance.json", to_json(r));
    write_text_atomic(fs::path(o.out) / "importance.csv", importance_csv(r));
    resolved.update({{"mode", o.mode}, {"resamples", o.resamples}, {"sample_size", o.sample_size}});
    out << "base score " << format_number(r.base_score) << "; ranking:";
    for (auto g : r.ranking()) out << " " << r.group_names[g] << " (" << format_number(r.mean[g]) << ")";
    out << "\n";
  } else {
    if (input != InputKind::image) throw ConfigError("attribution maps need an image-input model");
    if (model.map_output()) throw ConfigError("attribution needs a scalar-output model");
    const Split train = reader.load_split("train");
    const std::size_t nb = std::min(o.background, train.size());
    if (nb == 0) throw ConfigError("--background must be at least 1");
    std::vector<std::size_t> bg_rows(train.size());
    for (std::size_t i = 0; i < bg_rows.size(); ++i) bg_rows[i] = i;
    Rng pick(derive_seed(o.seed, 0xb9));
    pick.shuffle(std::span<std::size_t>(bg_rows));
    bg_rows.resize(nb);
    const Tensor background = take_rows(train.images, bg_rows);

    const std::size_t n = std::min(o.samples, images.size());
    std::vector<AttributionResult> results;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      AttributionConfig ac;
      ac.n_steps = o.steps;
      ac.seed = derive_seed(o.seed, 0xa7, i);
      const std::vector<std::size_t> row{i};
      Tensor x = take_rows(images.inputs, row);
      Shape one = x.shape();
      one.erase(one.begin());
      results.push_back(attribute(model, x.reshaped(one), background, ac));
      index.push_back(images.source_index[i]);
    }
    write_attributions(results, index, names, o.out);
    resolved.update({{"steps", o.steps}, {"background", nb}, {"samples", n}});
    const ChannelRatios ratios = aggregate_attributions(results);
    double worst = 0.0;
    for (const auto& r : results) worst = std::max(worst, r.completeness_residual);
    out << "signed channel ratios:";
    for (std::size_t c = 0; c < names.size(); ++c) out << " " << names[c] << " " << format_number(ratios.signed_ratio[c]);
    out << "; max completeness residual " << format_number(worst) << "\n";
  }
  write_json(fs::path(o.out) / "resolved_config.json", resolved);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightning prediction on synthetic storm imagery", "stormnet"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic dataset");
  gen.seed_opt = generate_cmd->add_option("--seed", gen.seed, "Seed (default: STORMNET_SEED or 0)");
  generate_cmd->add_option("--out", gen.out, "Dataset directory");
  generate_cmd->add_option("--train", gen.train, "Training samples");
  generate_cmd->add_option("--val", gen.val, "Validation samples");
  generate_cmd->add_option("--test", gen.test, "Test samples");
  generate_cmd->add_option("--pos-rate", gen.pos_rate, "Target fraction of lightning pixels");
  generate_cmd->add_option("--config", gen.config, "JSON file of option values; flags take precedence");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  add_train_flags(*train_cmd, tr);

  TrainOptions se;
  std::size_t trials = 100;
  auto* search_cmd = app.add_subcommand("search", "Random hyperparameter search");
  add_train_flags(*search_cmd, se);
  search_cmd->add_option("--trials", trials, "Number of random configurations");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a split");
  eval_cmd->add_option("--model", ev.model, "Model file");
  eval_cmd->add_option("--data", ev.data, "Dataset directory");
  eval_cmd->add_option("--split", ev.split)->check(CLI::IsMember({"val", "test"}));
  eval_cmd->add_option("--sweep-step", ev.sweep_step, "Threshold increment");
  eval_cmd->add_option("--mode", ev.mode, "image, pixel or image_sum (default by model)")
      ->check(CLI::IsMember({"image", "pixel", "image_sum"}));
  eval_cmd->add_option("--out", ev.out, "Output directory");
  eval_cmd->add_option("--config", ev.config, "JSON file of option values; flags take precedence");

  ExplainOptions ex;
  auto* explain_cmd = app.add_subcommand("explain", "Permutation importance or attribution maps");
  explain_cmd->add_option("--model", ex.model, "Model file");
  explain_cmd->add_option("--data", ex.data, "Dataset directory");
  explain_cmd->add_option("--split", ex.split)->check(CLI::IsMember({"train", "val", "test"}));
  explain_cmd->add_option("--method", ex.method)->check(CLI::IsMember({"perm", "attr"}));
  explain_cmd->add_option("--mode", ex.mode, "Permutation importance pass")->check(CLI::IsMember({"single", "multi"}));
  explain_cmd->add_option("--resamples", ex.resamples, "Permutation resamples");
  explain_cmd->add_option("--sample-size", ex.sample_size, "Images per resample");
  explain_cmd->add_option("--steps", ex.steps, "Interpolation steps per background sample");
  explain_cmd->add_option("--background", ex.background, "Background samples drawn from the training split");
  explain_cmd->add_option("--samples", ex.samples, "Samples to attribute");
  ex.seed_opt = explain_cmd->add_option("--seed", ex.seed, "Seed (default: STORMNET_SEED or 0)");
  explain_cmd->add_option("--out", ex.out, "Output directory");
  explain_cmd->add_option("--config", ex.config, "JSON file of option values; flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands())
      if (sub->parsed()) failed = sub;
    err << failed->help();
    return kUsage;
  }

  try {
    if (generate_cmd->parsed()) return cmd_generate(gen, *generate_cmd, out);
    if (train_cmd->parsed()) return cmd_train(tr, *train_cmd, out);
    if (search_cmd->parsed()) return cmd_search(se, trials, *search_cmd, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, *eval_cmd, out);
    if (explain_cmd->parsed()) return cmd_explain(ex, *explain_cmd, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const FormatError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace stormnet::cli
