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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Criterion numbers may be passed as arguments
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stormnet/cli.hpp"
#include "stormnet/container.hpp"
#include "stormnet/data.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/evaluate.hpp"
#include "stormnet/losses.hpp"
#include "stormnet/metrics.hpp"
#include "stormnet/model.hpp"
#include "stormnet/task.hpp"
#include "stormnet/train.hpp"
#include "stormnet/xai.hpp"

namespace {

using namespace stormnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void progress(const std::string& msg) {
  std::printf("    %s\n", msg.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------- shared fixtures

const Dataset& default_dataset() {
  static const Dataset d = [] {
    GeneratorConfig g;
    g.seed = 1;
    return generate(g);
  }();
  return d;
}

Model train_model(ModelSpec spec, const TaskData& train, const TaskData& val, TrainConfig cfg,
                  const std::string& label) {
  Trainer t(Model(std::move(spec)), cfg);
  t.on_epoch = [&](const EpochLog& e) {
    progress(label + " epoch " + std::to_string(e.epoch) + " train_loss " + fmt("%.4f", e.train_loss) +
             " val_metric " + fmt("%.4f", e.val_metric) + fmt(" (%.1f s)", e.seconds));
  };
  t.fit(train, val);
  return t.model();
}

TrainConfig classification_config(std::size_t epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.batch_size = 32;
  c.loss = {LossKind::bce, 1.0};
  c.seed = 5;
  c.patience = epochs;
  return c;
}

// ---------------------------------------------------------------- 1

double loss_gradient_error(Model& model, const Tensor& x, const Tensor& y, const Loss& loss) {
  auto objective = [&](const Tensor& in) {
    model.reseed(11);
    return loss_and_grad(loss, model.forward(in), y).value;
  };
  model.reseed(11);
  const auto lv = loss_and_grad(loss, model.forward(x), y);
  model.backward(lv.grad);
  auto refs = model.param_refs();
  double worst = 0.0;
  for (auto& p : refs) {
    const Tensor analytic = *p.grad;
    const Tensor original = *p.value;
    auto f = [&](const Tensor& t) {
      *p.value = t;
      const double v = objective(x);
      *p.value = original;
      return v;
    };
    worst = std::max(worst, finite_difference_check(f, original, analytic));
  }
  return worst;
}

Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t = oracle::random_tensor(rng, std::move(shape), 0.05, 1.0);
  for (auto& v : t.data())
    if (rng.bernoulli(0.5)) v = -v;
  return t;
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::map<std::string, std::pair<double, int>> worst;
  auto record = [&](const std::string& kind, double err) {
    auto& w = worst[kind];
    w.first = std::max(w.first, err);
    ++w.second;
  };
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); };
  const std::vector<ActivationKind> acts{ActivationKind::linear, ActivationKind::relu, ActivationKind::sigmoid,
                                         ActivationKind::softmax, ActivationKind::softplus};
  const std::vector<ActivationKind> conv_acts{ActivationKind::linear, ActivationKind::relu, ActivationKind::sigmoid,
                                              ActivationKind::softplus};

  for (int cfg = 0; cfg < 20; ++cfg) {
    const Mode train = Mode::train, infer = Mode::inference;
    {
      Dense d(pick(1, 6), pick(1, 5), acts[cfg % acts.size()]);
      d.initialize(rng);
      d.bias() = oracle::random_tensor(rng, {d.out_features()});
      record("dense", oracle::layer_gradient_error(d, {oracle::random_tensor(rng, {pick(1, 4), d.in_features()})},
                                                   infer, rng));
    }
    {
      const std::size_t k = std::array<std::size_t, 3>{1, 3, 5}[cfg % 3];
      Conv2D c(pick(1, 3), pick(1, 3), k, conv_acts[cfg % conv_acts.size()]);
      c.initialize(rng);
      c.bias() = oracle::random_tensor(rng, {c.filters()}, -0.2, 0.2);
      record("conv2d", oracle::layer_gradient_error(
                           c, {oracle::random_tensor(rng, {pick(1, 2), pick(1, 6), pick(1, 6), c.in_channels()})},
                           infer, rng));
    }
    for (auto mode : {PoolMode::max, PoolMode::average}) {
      Pool2D p(mode);
      record(mode == PoolMode::max ? "pool2d.max" : "pool2d.average",
             oracle::layer_gradient_error(
                 p, {oracle::random_tensor(rng, {pick(1, 2), 2 * pick(1, 4), 2 * pick(1, 4), pick(1, 3)})}, infer,
                 rng));
    }
    {
      Upsample2D u;
      record("upsample", oracle::layer_gradient_error(
                             u, {oracle::random_tensor(rng, {pick(1, 2), pick(1, 4), pick(1, 4), pick(1, 3)})}, infer,
                             rng));
    }
    {
      Concat c;
      const std::size_t b = pick(1, 2), h = pick(1, 4), w = pick(1, 4);
      record("concat", oracle::layer_gradient_error(c,
                                                    {oracle::random_tensor(rng, {b, h, w, pick(1, 3)}),
                                                     oracle::random_tensor(rng, {b, h, w, pick(1, 3)})},
                                                    infer, rng));
    }
    {
      Flatten f;
      record("flatten", oracle::layer_gradient_error(
                            f, {oracle::random_tensor(rng, {pick(1, 3), pick(1, 3), pick(1, 3), pick(1, 3)})}, infer,
                            rng));
    }
    {
      Dropout off(0.3, 1);
      record("dropout(off)",
             oracle::layer_gradient_error(off, {oracle::random_tensor(rng, {pick(1, 4), pick(1, 6)})}, infer, rng));
      Dropout on(0.1 + 0.02 * cfg, 2);
      record("dropout(fixed mask)",
             oracle::layer_gradient_error(on, {oracle::random_tensor(rng, {pick(1, 4), pick(1, 6)})}, train, rng));
    }
    {
      const std::size_t f = pick(1, 4);
      BatchNorm bn(f);
      bn.gamma() = oracle::random_tensor(rng, {f}, 0.5, 1.5);
      bn.beta() = oracle::random_tensor(rng, {f});
      const Shape shape = cfg % 2 ? Shape{pick(2, 5), f} : Shape{pick(2, 3), pick(1, 3), pick(1, 3), f};
      record("batchnorm(train)", oracle::layer_gradient_error(bn, {oracle::random_tensor(rng, shape)}, train, rng));
      for (int i = 0; i < 3; ++i) bn.forward(oracle::random_tensor(rng, shape), train);
      record("batchnorm(inference)",
             oracle::layer_gradient_error(bn, {oracle::random_tensor(rng, shape)}, infer, rng));
    }
    for (auto act : acts) {
      Activation a(act);
      const Shape shape =
          cfg % 2 ? Shape{pick(1, 4), pick(1, 6)} : Shape{pick(1, 2), pick(1, 3), pick(1, 3), pick(1, 4)};
      record("activation." + to_string(act), oracle::layer_gradient_error(a, {away_from_zero(rng, shape)}, infer, rng));
    }
    {
      const std::size_t c = pick(2, 4);
      std::vector<double> mask(c, 1.0);
      mask[rng.below(c)] = 0.0;
      ChannelMask m(mask);
      record("channel_mask",
             oracle::layer_gradient_error(m, {oracle::random_tensor(rng, {pick(1, 2), pick(1, 3), pick(1, 3), c})},
                                          infer, rng));
    }
  }

  // Full networks under their training loss. Smooth activations keep finite
  // differences away from kinks; pooling alternates between max and average.
  const std::vector<ActivationKind> smooth{ActivationKind::softplus, ActivationKind::sigmoid, ActivationKind::linear};
  for (int cfg = 0; cfg < 20; ++cfg) {
    const bool classify = cfg % 2 == 0;
    const std::size_t blocks = pick(1, 2), side = blocks == 1 ? 2 * pick(2, 4) : 8;
    ModelSpec s = default_spec(ModelKind::cnn, {side, side, pick(1, 3)},
                               classify ? OutputKind::sigmoid_scalar : OutputKind::linear_scalar);
    s.conv_blocks.clear();
    for (std::size_t b = 0; b < blocks; ++b) s.conv_blocks.push_back({pick(1, 4), pick(1, 2)});
    s.kernel_size = std::array<std::size_t, 3>{1, 3, 5}[cfg % 3];
    s.hidden_layers = cfg % 4 == 3 ? std::vector<std::size_t>{} : std::vector<std::size_t>{pick(2, 6)};
    s.activation = smooth[cfg % smooth.size()];
    s.pool = cfg % 4 < 2 ? PoolMode::max : PoolMode::average;
    s.dropout_rate = cfg % 5 == 0 ? 0.2 : 0.0;
    s.seed = 1000 + cfg;
    Model m(s);
    m.set_mode(s.dropout_rate > 0 ? Mode::train : Mode::inference);
    const std::size_t batch = 2;
    Tensor x = oracle::random_tensor(rng, {batch, side, side, s.input_shape[2]}, 0, 1);
    Tensor y({batch, 1});
    for (auto& v : y.data()) v = classify ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
    record("model.cnn", loss_gradient_error(m, x, y, classify ? Loss{LossKind::bce} : Loss{LossKind::mse}));
  }
  for (int cfg = 0; cfg < 20; ++cfg) {
    const bool classify = cfg % 2 == 0;
    const std::size_t depth = pick(1, 2), side = depth == 1 ? 2 * pick(3, 4) : 12;
    ModelSpec s = default_spec(ModelKind::unet, {side, side, pick(1, 2)},
                               classify ? OutputKind::sigmoid_map : OutputKind::linear_map);
    s.depth = depth;
    s.base_filters = pick(1, 3);
    s.kernel_size = cfg % 3 == 0 ? 1 : 3;
    // Sigmoid stacks through two levels shrink early gradients to the
    // finite-difference noise floor, so the U-Net alternates softplus and
    // linear; sigmoid is covered by the layer and CNN checks.
    s.activation = cfg % 2 ? ActivationKind::linear : ActivationKind::softplus;
    s.pool = cfg % 4 < 2 ? PoolMode::max : PoolMode::average;
    s.seed = 2000 + cfg;
    Model m(s);
    Tensor x = oracle::random_tensor(rng, {2, side, side, s.input_shape[2]}, 0, 1);
    Tensor y({2, side, side, 1});
    for (auto& v : y.data()) v = classify ? (rng.bernoulli(0.1) ? 1.0 : 0.0) : std::floor(rng.uniform(0, 3));
    record("model.unet", loss_gradient_error(m, x, y, classify ? Loss{LossKind::bce} : Loss{LossKind::mse}));
  }

  double overall = 0.0;
  int min_count = 1 << 30;
  std::string worst_kind;
  for (const auto& [kind, w] : worst) {
    if (w.first >= overall) {
      overall = w.first;
      worst_kind = kind;
    }
    min_count = std::min(min_count, w.second);
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << worst.size() << " kinds x >= " << min_count << " configs, max rel error " << fmt("%.2e", overall) << " ("
    << worst_kind << "), " << fmt("%.1f s", elapsed);
  return {overall <= 1e-4 && min_count >= 20 && elapsed < 120.0, d.str()};
}

// ---------------------------------------------------------------- 2

Outcome convolution_oracle() {
  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = std::array<std::size_t, 3>{1, 3, 5}[i % 3];
    // Images down to 1x1 so padding dominates some cases.
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(4), h = 1 + rng.below(9), w = 1 + rng.below(9);
    Conv2D conv(cin, cout, k, ActivationKind::linear);
    conv.initialize(rng);
    conv.bias() = oracle::random_tensor(rng, {cout});
    const Tensor x = oracle::random_tensor(rng, {1 + rng.below(3), h, w, cin});
    const Tensor got = conv.forward(x, Mode::inference);
    const Tensor want = oracle::naive_conv(x, conv.weight(), conv.bias());
    for (std::size_t j = 0; j < got.size(); ++j) worst = std::max(worst, std::fabs(got[j] - want[j]));
  }
  return {worst <= 1e-12, "100 cases, k in {1,3,5}, max abs diff " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 3

std::size_t epochs_to_overfit(ModelSpec spec, const TaskData& data, double lr, std::size_t max_epochs,
                              double& final_loss) {
  TrainConfig c = classification_config(max_epochs);
  c.batch_size = data.size();
  c.optimizer.learning_rate = lr;
  c.plateau_eps = 0.0;  // never plateau
  Trainer t(Model(std::move(spec)), c);
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    t.fit(data, TaskData{}, e);
    final_loss = t.log().epochs.back().train_loss;
    if (final_loss < 1e-3) return e;
  }
  return max_epochs + 1;
}

Outcome overfit_capacity() {
  const Dataset& d = default_dataset();
  std::vector<std::size_t> rows(32);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const Split subset = d.train.subset(rows);
  std::ostringstream detail;
  bool pass = true;
  for (const std::string which : {"cnn", "mlp"}) {
    const auto t0 = Clock::now();
    const bool cnn = which == "cnn";
    const TaskData data = make_task_data(subset, Task::cls, cnn ? InputKind::image : InputKind::engineered);
    ModelSpec s = default_spec(cnn ? ModelKind::cnn : ModelKind::mlp, data.input_shape(), OutputKind::sigmoid_scalar);
    s.seed = 7;
    double loss = 0.0;
    const std::size_t epochs = epochs_to_overfit(s, data, cnn ? 1e-3 : 3e-3, 2000, loss);
    const double elapsed = seconds_since(t0);
    const bool ok = epochs <= 2000 && elapsed < 300.0;
    pass = pass && ok;
    detail << which << ": loss " << fmt("%.2e", loss) << " after " << std::min<std::size_t>(epochs, 2000)
           << " epochs (" << fmt("%.1f s", elapsed) << ")" << (which == "cnn" ? "; " : "");
  }
  return {pass, detail.str()};
}

// ---------------------------------------------------------------- 4

Outcome synthetic_skill() {
  const auto t0 = Clock::now();
  const Dataset& d = default_dataset();
  std::map<std::string, double> auc;
  for (const std::string which : {"mlp_eng", "mlp_pix", "cnn"}) {
    const InputKind input = which == "mlp_eng" ? InputKind::engineered : InputKind::image;
    const TaskData tr = make_task_data(d.train, Task::cls, input);
    const TaskData va = make_task_data(d.val, Task::cls, input);
    ModelSpec s = default_spec(which == "cnn" ? ModelKind::cnn : ModelKind::mlp, tr.input_shape(),
                               OutputKind::sigmoid_scalar);
    s.seed = 3;
    Model m = train_model(s, tr, va, classification_config(which == "cnn" ? 8 : 15), which);
    auc[which] = evaluate(m, va, EvalMode::image).roc.auc;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = auc["cnn"] >= 0.95 && auc["mlp_eng"] >= 0.95 && auc["mlp_pix"] >= 0.85 &&
                    auc["mlp_pix"] < auc["cnn"] && auc["mlp_pix"] < auc["mlp_eng"] && elapsed < 900.0;
  return {pass, "val AUC cnn " + fmt("%.4f", auc["cnn"]) + ", mlp_eng " + fmt("%.4f", auc["mlp_eng"]) +
                    ", mlp_pix " + fmt("%.4f", auc["mlp_pix"]) + fmt(" (%.0f s)", elapsed)};
}

// ---------------------------------------------------------------- 5, 6

Split first_n(const Split& s, std::size_t n) {
  std::vector<std::size_t> rows(std::min(n, s.size()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return s.subset(rows);
}

Model train_unet(Task task, std::size_t n_train, const TaskData& val) {
  const TaskData tr = make_task_data(first_n(default_dataset().train, n_train), task, InputKind::image);
  ModelSpec s = default_spec(ModelKind::unet, tr.input_shape(), output_for(task));
  s.depth = 2;
  s.base_filters = 8;
  s.seed = 3;
  TrainConfig c = classification_config(8);
  c.batch_size = 16;
  c.loss = default_loss(task);
  return train_model(s, tr, val, c, "unet." + to_string(task));
}

Outcome imbalance_threshold() {
  const TaskData va = make_task_data(default_dataset().val, Task::seg_cls, InputKind::image);
  Model m = train_unet(Task::seg_cls, 500, va);
  const auto r = evaluate_unet(m, va, EvalMode::pixel);
  return {r.sweep.best_threshold < 0.5, "best threshold " + fmt("%.2f", r.sweep.best_threshold) + " (csi " +
                                            fmt("%.3f", r.sweep.best_csi) + ", pixel auc " +
                                            fmt("%.4f", r.roc.auc) + ")"};
}

Outcome unet_regression_accounting() {
  const TaskData va = make_task_data(default_dataset().val, Task::seg_reg, InputKind::image);
  Model m = train_unet(Task::seg_reg, 300, va);
  const auto px = evaluate_unet(m, va, EvalMode::pixel).regression;
  const auto im = evaluate_unet(m, va, EvalMode::image_sum).regression;
  const bool pass = px.mae < im.mae && px.rmse < im.rmse;
  return {pass, "pixel mae " + fmt("%.4g", px.mae) + " rmse " + fmt("%.4g", px.rmse) + " vs image_sum mae " +
                    fmt("%.4g", im.mae) + " rmse " + fmt("%.4g", im.rmse)};
}

// ---------------------------------------------------------------- 7, 8

// Classification CNN on five channels: the four generator channels plus an
// injected uniform-noise channel that the model structurally ignores.
struct XaiFixture {
  TaskData train, val;
  std::unique_ptr<Model> model;
  std::vector<std::string> names{"vil", "ir", "wv", "vis", "noise"};
};

TaskData with_noise_channel(const TaskData& d, Rng& rng) {
  TaskData out = d;
  const std::size_t n = d.size(), px = kImageSize * kImageSize;
  out.inputs = Tensor({n, kImageSize, kImageSize, kChannels + 1});
  for (std::size_t i = 0; i < n * px; ++i) {
    for (std::size_t c = 0; c < kChannels; ++c) out.inputs[i * (kChannels + 1) + c] = d.inputs[i * kChannels + c];
    out.inputs[i * (kChannels + 1) + kChannels] = rng.uniform();
  }
  return out;
}

XaiFixture& xai_fixture() {
  static XaiFixture f = [] {
    XaiFixture x;
    Rng rng(808);
    const Dataset& d = default_dataset();
    x.train = with_noise_channel(make_task_data(d.train, Task::cls, InputKind::image), rng);
    x.val = with_noise_channel(make_task_data(d.val, Task::cls, InputKind::image), rng);
    ModelSpec s = default_spec(ModelKind::cnn, x.train.input_shape(), OutputKind::sigmoid_scalar);
    s.ignored_channels = {kChannels};
    s.seed = 4;
    x.model = std::make_unique<Model>(train_model(s, x.train, x.val, classification_config(8), "cnn5"));
    return x;
  }();
  return f;
}

std::vector<AttributionResult>& attributions() {
  static std::vector<AttributionResult> results = [] {
    XaiFixture& f = xai_fixture();
    Rng rng(909);
    std::vector<std::size_t> bg_rows;
    for (int i = 0; i < 4; ++i) bg_rows.push_back(rng.below(f.train.size()));
    const Tensor background = take_rows(f.train.inputs, bg_rows);
    const Shape one = f.val.input_shape();
    std::vector<AttributionResult> out;
    for (std::size_t i = 0; i < 100; ++i) {
      const std::vector<std::size_t> row{i};
      AttributionConfig c;
      c.n_steps = 256;
      c.seed = derive_seed(17, i);
      out.push_back(attribute(*f.model, take_rows(f.val.inputs, row).reshaped(one), background, c));
      if ((i + 1) % 25 == 0) progress("attributed " + std::to_string(i + 1) + " samples");
    }
    return out;
  }();
  return results;
}

Outcome attribution_completeness() {
  double worst = 0.0;
  for (const auto& r : attributions()) worst = std::max(worst, r.completeness_residual);

  // Linear model: a perceptron on the same images.
  Rng rng(707);
  ModelSpec s = default_spec(ModelKind::perceptron, {kImageSize, kImageSize, kChannels}, OutputKind::linear_scalar);
  s.seed = 9;
  Model linear(s);
  const TaskData va = make_task_data(default_dataset().val, Task::cls, InputKind::image);
  double linear_worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::vector<std::size_t> row{i}, bg{100 + i, 200 + i, 300 + i};
    const auto r = attribute(linear, take_rows(va.inputs, row).reshaped(va.input_shape()), take_rows(va.inputs, bg),
                             {64, i, 64});
    linear_worst = std::max(linear_worst, r.completeness_residual);
  }
  return {worst <= 0.02 && linear_worst <= 1e-10,
          "cnn: max residual " + fmt("%.2e", worst) + " over 100 val samples at 256 steps; linear: " +
              fmt("%.2e", linear_worst)};
}

Outcome xai_agreement() {
  XaiFixture& f = xai_fixture();
  ImportanceConfig cfg;
  cfg.n_resamples = 30;
  cfg.sample_size = 250;
  cfg.seed = 31;
  cfg.group_names = f.names;
  const auto imp = permutation_importance(*f.model, f.val.inputs, f.val.targets, importance_metric(Task::cls), cfg);
  const auto rank = imp.ranking();
  const auto ratios = aggregate_attributions(attributions());
  const std::size_t noise = kChannels;

  std::size_t top_ratio = 0, top_abs = 0;
  for (std::size_t c = 0; c < ratios.signed_ratio.size(); ++c) {
    if (ratios.signed_ratio[c] > ratios.signed_ratio[top_ratio]) top_ratio = c;
    if (ratios.absolute_ratio[c] > ratios.absolute_ratio[top_abs]) top_abs = c;
  }
  const double top_importance = imp.mean[rank.front()];
  const bool noise_last = rank.back() == noise;
  const bool noise_small = std::fabs(imp.mean[noise]) <= 0.05 * top_importance;
  double noise_attribution = 0.0;
  for (const auto& r : attributions()) {
    const auto& a = r.attributions;
    for (std::size_t i = noise; i < a.size(); i += kChannels + 1)
      noise_attribution = std::max(noise_attribution, std::fabs(a[i]));
  }
  const bool pass =
      rank.front() == kVil && top_ratio == kVil && noise_last && noise_small && noise_attribution <= 1e-10;

  std::ostringstream d;
  d << "importance order";
  for (auto g : rank) d << " " << f.names[g] << "=" << fmt("%.4f", imp.mean[g]);
  d << "; signed ratios";
  for (std::size_t c = 0; c < ratios.signed_ratio.size(); ++c)
    d << " " << f.names[c] << "=" << fmt("%.3f", ratios.signed_ratio[c]);
  d << "; absolute ratio top " << f.names[top_abs] << "; max |noise attribution| " << fmt("%.1e", noise_attribution);
  return {pass, d.str()};
}

// ---------------------------------------------------------------- 9

Outcome early_stopping() {
  Rng rng(909);
  auto linear_task = [&](std::size_t n) {
    TaskData d;
    d.task = Task::reg;
    d.input = InputKind::engineered;
    d.inputs = oracle::random_tensor(rng, {n, 3});
    d.targets = Tensor({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      d.targets[i] = 0.5 * d.inputs[i * 3] - 1.5 * d.inputs[i * 3 + 1] + 0.25 * d.inputs[i * 3 + 2] + 0.1;
      d.source_index.push_back(i);
    }
    return d;
  };
  const TaskData tr = linear_task(200), va = linear_task(50);
  ModelSpec s = default_spec(ModelKind::perceptron, {3}, OutputKind::linear_scalar);
  Model m(s);
  TrainConfig c;
  c.max_epochs = 1000;
  c.batch_size = 20;
  c.optimizer = {OptimizerKind::sgd, 0.1};
  c.loss = {LossKind::mse};
  c.plateau_eps = 1e-6;
  c.patience = 5;
  const auto log = train(m, tr, va, c);
  return {log.stop == StopReason::plateau && log.epochs.size() < c.max_epochs,
          "stopped (" + to_string(log.stop) + ") after " + std::to_string(log.epochs.size()) + " of " +
              std::to_string(c.max_epochs) + " epochs"};
}

// ---------------------------------------------------------------- 10

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stormnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) progress("stormnet exited " + std::to_string(code) + ": " + err.str());
  return code;
}

std::string file_text(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

// The wall-clock column is the one field of a training log that cannot
// repeat between runs.
std::string without_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome determinism_and_persistence() {
  const fs::path root = oracle::temp_dir("acceptance_e2e");
  const fs::path run = root / "run";
  auto pipeline = [&] {
    fs::remove_all(run);
    return run_cli({"generate", "--seed", "21", "--out", (run / "data").string(), "--train", "200", "--val", "100",
                    "--test", "100"}) == 0 &&
           run_cli({"train", "--data", (run / "data").string(), "--model", "cnn", "--task", "cls", "--epochs", "2",
                    "--filters", "4,8", "--hidden", "16", "--dropout", "0.1", "--batchnorm", "--augment", "--seed", "8",
                    "--out", (run / "train").string()}) == 0 &&
           run_cli({"eval", "--model", (run / "train" / "model.stormnet").string(), "--data",
                    (run / "data").string(), "--split", "test", "--out", (run / "eval").string()}) == 0;
  };
  if (!pipeline()) return {false, "first pipeline run failed"};
  fs::rename(run, root / "first");
  if (!pipeline()) return {false, "second pipeline run failed"};

  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "first")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "first");
    std::string a = file_text(entry.path()), b = file_text(run / rel);
    if (rel.filename() == "train_log.csv") {
      a = without_seconds(a);
      b = without_seconds(b);
    }
    ++files;
    if (a != b) {
      ++differing;
      progress("differs: " + rel.string());
    }
  }

  // Checkpoint resume against an uninterrupted run.
  const Dataset d = read_dataset(run / "data");
  const TaskData tr = make_task_data(first_n(d.train, 64), Task::cls, InputKind::image);
  const TaskData va = make_task_data(d.val, Task::cls, InputKind::image);
  ModelSpec s = default_spec(ModelKind::cnn, tr.input_shape(), OutputKind::sigmoid_scalar);
  s.conv_blocks = {{4, 1}, {8, 1}};
  s.hidden_layers = {16};
  s.use_batchnorm = true;
  s.dropout_rate = 0.2;
  s.seed = 12;
  TrainConfig c = classification_config(4);
  c.batch_size = 16;
  c.augment = true;
  Trainer whole(Model(s), c);
  whole.fit(tr, va);
  Trainer half(Model(s), c);
  half.fit(tr, va, 2);
  const auto ckpt_path = root / "half.ckpt";
  write_file_atomic(ckpt_path, half.checkpoint());
  Trainer resumed = Trainer::restore(read_file(ckpt_path));
  resumed.fit(tr, va);
  const bool resume_equal = serialize(resumed.model()) == serialize(whole.model()) &&
                            without_seconds(resumed.log().csv()) == without_seconds(whole.log().csv());

  // Container round trips.
  Model saved = load_model(run / "train" / "model.stormnet");
  const auto model_bytes = read_file(run / "train" / "model.stormnet");
  const bool model_round_trip = serialize(saved) == model_bytes;
  GeneratorConfig g;
  g.seed = 21;
  g.n_train = 200;
  g.n_val = 100;
  g.n_test = 100;
  const Dataset fresh = generate(g);
  const bool dataset_round_trip = fresh.train.images == d.train.images && fresh.train.flashes == d.train.flashes &&
                                  fresh.val.images == d.val.images && fresh.test.flashes == d.test.flashes;
  auto corrupted = model_bytes;
  corrupted[corrupted.size() / 2] ^= 0x10;
  bool corruption_detected = false;
  try {
    deserialize(corrupted);
  } catch (const FormatError&) {
    corruption_detected = true;
  }

  fs::remove_all(root);
  const bool pass = differing == 0 && files > 0 && resume_equal && model_round_trip && dataset_round_trip &&
                    corruption_detected;
  std::ostringstream detail;
  detail << files << " pipeline files compared, " << differing << " differ (train_log seconds column excluded); "
         << "resume " << (resume_equal ? "bitwise equal" : "DIFFERS") << "; model container "
         << (model_round_trip ? "ok" : "BAD") << "; dataset container " << (dataset_round_trip ? "ok" : "BAD")
         << "; corruption " << (corruption_detected ? "detected" : "MISSED");
  return {pass, detail.str()};
}

// ---------------------------------------------------------------- 11

Outcome metric_oracles() {
  Rng rng(1111);
  double auc_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 50 + rng.below(400);
    std::vector<double> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
      p[i] = trial % 2 ? std::round(rng.uniform() * 10) / 10 : rng.uniform();  // half the sets heavily tied
      p[i] = std::min(1.0, p[i] + 0.1 * y[i]);
    }
    if (std::count(y.begin(), y.end(), 1.0) == 0) y[0] = 1.0;
    if (std::count(y.begin(), y.end(), 0.0) == 0) y[0] = 0.0;
    auc_worst = std::max(auc_worst, std::fabs(roc_auc(p, y).auc - oracle::concordance_auc(p, y)));
  }
  double csi_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Contingency c{1 + rng.below(1000), rng.below(1000), rng.below(1000), rng.below(1000)};
    const auto s = scores(c);
    csi_worst = std::max(csi_worst, std::fabs(1.0 / s.csi - (1.0 / s.pod + 1.0 / s.sr - 1.0)));
  }
  return {auc_worst <= 1e-12 && csi_worst <= 1e-12,
          "auc vs concordance max diff " + fmt("%.1e", auc_worst) + " on 50 sets; csi identity max diff " +
              fmt("%.1e", csi_worst) + " on 1000 tables"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient fidelity", gradient_fidelity},
      {2, "convolution oracle", convolution_oracle},
      {3, "overfit capacity", overfit_capacity},
      {4, "synthetic task skill", synthetic_skill},
      {5, "imbalance threshold", imbalance_threshold},
      {6, "u-net regression accounting", unet_regression_accounting},
      {7, "attribution completeness", attribution_completeness},
      {8, "xai cross-method agreement", xai_agreement},
      {9, "early stopping", early_stopping},
      {10, "determinism and persistence", determinism_and_persistence},
      {11, "metric oracles", metric_oracles},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::printf("[....] %2d %s\n", c.id, c.name);
    std::fflush(stdout);
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
