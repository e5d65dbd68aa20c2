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

#include "stormnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "stormnet/container.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/evaluate.hpp"

namespace stormnet {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5348;
constexpr std::uint64_t kDropoutSalt = 0xd0d0;
constexpr std::uint64_t kAugmentSalt = 0xa06;
constexpr const char* kCheckpointSection = "checkpoint";

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(c.optimizer.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (c.patience < 1) throw ConfigError("patience must be at least 1");
  if (!(c.plateau_eps >= 0.0)) throw ConfigError("plateau epsilon must be non-negative");
  if (!(c.loss.pos_weight > 0.0)) throw ConfigError("pos_weight must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"optimizer", to_string(c.optimizer.kind)},
          {"learning_rate", c.optimizer.learning_rate},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"rho", c.optimizer.rho},
          {"epsilon", c.optimizer.epsilon},
          {"loss", to_string(c.loss.kind)},
          {"pos_weight", c.loss.pos_weight},
          {"plateau_eps", c.plateau_eps},
          {"patience", c.patience},
          {"augment", c.augment},
          {"seed", c.seed},
          {"eval_every_epoch", c.eval_every_epoch}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    if (j.contains("optimizer")) c.optimizer.kind = optimizer_from_string(j.at("optimizer").get<std::string>());
    c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
    c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
    c.optimizer.rho = j.value("rho", c.optimizer.rho);
    c.optimizer.epsilon = j.value("epsilon", c.optimizer.epsilon);
    if (j.contains("loss")) c.loss.kind = loss_from_string(j.at("loss").get<std::string>());
    c.loss.pos_weight = j.value("pos_weight", c.loss.pos_weight);
    c.plateau_eps = j.value("plateau_eps", c.plateau_eps);
    c.patience = j.value("patience", c.patience);
    c.augment = j.value("augment", c.augment);
    c.seed = j.value("seed", c.seed);
    c.eval_every_epoch = j.value("eval_every_epoch", c.eval_every_epoch);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
  validate(c);
  return c;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::none: return "none";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::plateau: return "plateau";
  }
  return "?";
}

std::string TrainLog::csv() const {
  std::string out = "epoch,train_loss,val_loss,val_metric,seconds\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ',' + format_number(e.train_loss) + ',' + format_number(e.val_loss) + ',' +
           format_number(e.val_metric) + ',' + format_number(e.seconds) + '\n';
  }
  return out;
}

void augment_batch(Tensor& inputs, Tensor* map_targets, Rng& rng, double noise_sigma) {
  if (inputs.rank() != 4) throw ShapeError("augmentation needs [N,H,W,C] inputs, got " + shape_str(inputs.shape()));
  const std::size_t n = inputs.dim(0);
  const Shape xs{inputs.dim(1), inputs.dim(2), inputs.dim(3)};
  const std::size_t xstride = shape_size(xs);
  Shape ys;
  std::size_t ystride = 0;
  if (map_targets) {
    ys = {map_targets->dim(1), map_targets->dim(2), map_targets->dim(3)};
    ystride = shape_size(ys);
  }
  auto row = [](Tensor& t, const Shape& s, std::size_t stride, std::size_t i) {
    const auto first = t.data().begin() + static_cast<std::ptrdiff_t>(i * stride);
    return Tensor(s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
  };
  auto store = [](Tensor& t, const Tensor& r, std::size_t stride, std::size_t i) {
    std::copy(r.data().begin(), r.data().end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const AugmentDraw d = draw_augmentation(rng, noise_sigma);
    auto geo = [&](const Tensor& t) {
      Tensor out = rotate90(t, d.quarter_turns);
      if (d.flip_ud) out = flip_up_down(out);
      if (d.flip_lr) out = flip_left_right(out);
      return out;
    };
    Tensor x = geo(row(inputs, xs, xstride, i));
    if (d.noise_sigma > 0.0)
      for (auto& v : x.data()) v = std::clamp(v + rng.normal(0.0, d.noise_sigma), 0.0, 1.0);
    store(inputs, x, xstride, i);
    if (map_targets) store(*map_targets, geo(row(*map_targets, ys, ystride, i)), ystride, i);
  }
}

Trainer::Trainer(Model model, TrainConfig config)
    : model_(std::move(model)), config_(config), optimizer_(config.optimizer) {
  validate(config_);
}

double Trainer::run_epoch(const TaskData& train, std::size_t epoch) {
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config_.seed, kShuffleSalt, epoch));
  shuffle_rng.shuffle(std::span<std::size_t>(order));

  const bool augment = config_.augment && train.input == InputKind::image && train.inputs.rank() == 4;
  model_.set_mode(Mode::train);
  double loss_sum = 0.0;
  std::size_t batch = 0;
  // Batch statistics need two samples, so a lone trailing sample joins the
  // batch before it when the model normalizes.
  const bool fold_single = model_.spec().use_batchnorm;
  for (std::size_t start = 0; start < n; ++batch) {
    std::size_t len = std::min(config_.batch_size, n - start);
    if (fold_single && n - start - len == 1) ++len;
    const std::span<const std::size_t> rows(order.data() + start, len);
    start += len;
    if (on_batch) on_batch(rows);
    Tensor x = take_rows(train.inputs, rows);
    Tensor y = take_rows(train.targets, rows);
    const std::uint64_t position = (static_cast<std::uint64_t>(epoch) << 32) | batch;
    if (augment) {
      Rng aug(derive_seed(config_.seed, kAugmentSalt, position));
      augment_batch(x, is_segmentation(train.task) ? &y : nullptr, aug);
    }
    model_.reseed(derive_seed(config_.seed, kDropoutSalt, position));

    try {
      const Tensor out = model_.forward(x);
      const LossValue lv = loss_and_grad(config_.loss, out, y);
      if (!std::isfinite(lv.value)) throw NumericError("non-finite training loss");
      model_.backward(lv.grad);
      optimizer_.step(model_.param_refs());
      loss_sum += lv.value * static_cast<double>(rows.size());
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1) + ", batch " +
                         std::to_string(batch + 1));
    }
  }
  model_.set_mode(Mode::inference);
  return loss_sum / static_cast<double>(n);
}

const TrainLog& Trainer::fit(const TaskData& train, const TaskData& val, std::size_t epoch_limit) {
  if (train.size() == 0) throw ConfigError("training set is empty");
  if (train.input_shape() != model_.spec().input_shape) {
    throw ShapeError("training inputs " + shape_str(train.input_shape()) + " do not match the model input " +
                     shape_str(model_.spec().input_shape));
  }
  log_.train_samples = train.size();
  if (config_.max_epochs == 0) log_.stop = StopReason::max_epochs;
  const bool have_val = val.size() > 0;

  while (!stopped() && epochs_done() < epoch_limit) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t epoch = epochs_done();
    EpochLog e;
    e.epoch = epoch + 1;
    e.train_loss = run_epoch(train, epoch);
    if (have_val) {
      const Tensor pred = model_.predict(val.inputs);
      e.val_loss = loss_and_grad(config_.loss, pred, val.targets).value;
      const bool last = epoch + 1 == config_.max_epochs;
      e.val_metric = config_.eval_every_epoch || last ? validation_metric(val.task, pred, val.targets)
                                                      : std::numeric_limits<double>::quiet_NaN();
    } else {
      e.val_loss = e.train_loss;
      e.val_metric = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(e.val_loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(e.epoch));
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (std::isfinite(previous_val_loss_) && std::abs(e.val_loss - previous_val_loss_) < config_.plateau_eps) {
      ++plateau_count_;
    } else {
      plateau_count_ = 0;
    }
    previous_val_loss_ = e.val_loss;
    log_.epochs.push_back(e);
    if (plateau_count_ >= config_.patience) {
      log_.stop = StopReason::plateau;
    } else if (epochs_done() >= config_.max_epochs) {
      log_.stop = StopReason::max_epochs;
    }
    if (on_epoch) on_epoch(e);
  }
  return log_;
}

std::vector<std::uint8_t> Trainer::checkpoint() {
  Bundle b;
  b.section = kCheckpointSection;
  b.meta["spec"] = to_json(model_.spec());
  b.meta["config"] = to_json(config_);
  b.meta["optimizer_steps"] = optimizer_.steps();
  b.meta["previous_val_loss"] = number_or_null(previous_val_loss_);
  b.meta["plateau_count"] = plateau_count_;
  b.meta["stop"] = to_string(log_.stop);
  b.meta["train_samples"] = log_.train_samples;
  auto& epochs = b.meta["epochs"] = nlohmann::json::array();
  for (const auto& e : log_.epochs) {
    epochs.push_back({e.epoch, number_or_null(e.train_loss), number_or_null(e.val_loss), number_or_null(e.val_metric),
                      e.seconds});
  }
  for (auto& [name, t] : model_.state_tensors()) b.arrays.push_back({"model/" + name, *t, DType::f64});
  for (const auto& [name, m] : optimizer_.state()) {
    b.arrays.push_back({"m/" + name, m.m, DType::f64});
    b.arrays.push_back({"v/" + name, m.v, DType::f64});
  }
  return encode_bundle(b);
}

Trainer Trainer::restore(std::span<const std::uint8_t> bytes) {
  Bundle b = decode_bundle(bytes);
  if (b.section != kCheckpointSection) throw FormatError("container does not hold a training checkpoint");
  try {
    Model model(spec_from_json(b.meta.at("spec")));
    Trainer t(std::move(model), train_config_from_json(b.meta.at("config")));
    std::map<std::string, Tensor*> state;
    for (auto& [name, p] : t.model_.state_tensors()) state["model/" + name] = p;
    std::map<std::string, Optimizer::Moments> moments;
    for (auto& a : b.arrays) {
      if (auto it = state.find(a.name); it != state.end()) {
        if (a.value.shape() != it->second->shape()) throw FormatError("checkpoint tensor '" + a.name + "' has the wrong shape");
        *it->second = std::move(a.value);
        state.erase(it);
      } else if (a.name.starts_with("m/")) {
        moments[a.name.substr(2)].m = std::move(a.value);
      } else if (a.name.starts_with("v/")) {
        moments[a.name.substr(2)].v = std::move(a.value);
      } else {
        throw FormatError("unexpected checkpoint array '" + a.name + "'");
      }
    }
    if (!state.empty()) throw FormatError("checkpoint is missing '" + state.begin()->first + "'");
    t.optimizer_.restore(b.meta.at("optimizer_steps").get<std::uint64_t>(), std::move(moments));
    t.previous_val_loss_ = number_from(b.meta.at("previous_val_loss"));
    t.plateau_count_ = b.meta.at("plateau_count").get<std::size_t>();
    const auto stop = b.meta.at("stop").get<std::string>();
    t.log_.stop = stop == "plateau" ? StopReason::plateau : stop == "max_epochs" ? StopReason::max_epochs : StopReason::none;
    t.log_.train_samples = b.meta.at("train_samples").get<std::size_t>();
    for (const auto& e : b.meta.at("epochs")) {
      t.log_.epochs.push_back({e.at(0).get<std::size_t>(), number_from(e.at(1)), number_from(e.at(2)),
                               number_from(e.at(3)), e.at(4).get<double>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

TrainLog train(Model& model, const TaskData& train_data, const TaskData& val, const TrainConfig& config) {
  Trainer t(model, config);
  t.fit(train_data, val);
  model = t.model();
  return t.log();
}

}  // namespace stormnet
