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

#include "stormnet/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stormnet/errors.hpp"

namespace stormnet {

namespace {

// Per-image reduction of [N, H, W, 1] maps.
std::vector<double> reduce_images(const Tensor& maps, bool use_max) {
  const std::size_t n = maps.dim(0), stride = maps.size() / n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = use_max ? -std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t p = 0; p < stride; ++p) {
      const double v = maps[i * stride + p];
      acc = use_max ? std::max(acc, v) : acc + v;
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace

EvalReport evaluate_predictions(const Tensor& predictions, const TaskData& data, bool map_output, EvalMode mode,
                                double step) {
  if (predictions.shape() != data.targets.shape()) {
    throw ShapeError("predictions " + shape_str(predictions.shape()) + " do not match targets " +
                     shape_str(data.targets.shape()));
  }
  if (map_output && mode == EvalMode::image) throw ConfigError("map-output models are evaluated in pixel or image_sum mode");
  if (!map_output && mode != EvalMode::image) throw ConfigError("scalar-output models are evaluated in image mode");

  EvalReport r;
  r.task = to_string(data.task);
  r.mode = mode;
  r.classification = is_classification(data.task);

  std::vector<double> pred, obs;
  if (mode == EvalMode::image_sum) {
    pred = reduce_images(predictions, r.classification);
    obs = reduce_images(data.targets, r.classification);
  } else {
    pred.assign(predictions.data().begin(), predictions.data().end());
    obs.assign(data.targets.data().begin(), data.targets.data().end());
  }
  r.count = pred.size();
  if (r.classification) {
    r.sweep = threshold_sweep(pred, obs, step);
    r.roc = roc_auc(pred, obs);
  } else {
    r.regression = regression_metrics(pred, obs);
    if (mode != EvalMode::pixel) {
      r.observed = obs;
      r.predicted = pred;
    }
  }
  return r;
}

EvalReport evaluate(Model& model, const TaskData& data, EvalMode mode, double step) {
  return evaluate_predictions(model.predict(data.inputs), data, model.map_output(), mode, step);
}

EvalReport evaluate_unet(Model& model, const TaskData& data, EvalMode mode, double step) {
  if (!model.map_output()) throw ConfigError("evaluate_unet needs a map-output model");
  return evaluate(model, data, mode, step);
}

EvalMode default_mode(const Model& model) { return model.map_output() ? EvalMode::pixel : EvalMode::image; }

double validation_metric(Task task, const Tensor& predictions, const Tensor& targets) {
  if (predictions.shape() != targets.shape()) throw ShapeError("validation predictions do not match targets");
  const auto p = predictions.data();
  const auto y = targets.data();
  if (!all_finite(p)) return std::numeric_limits<double>::quiet_NaN();
  switch (task) {
    case Task::cls:
      try {
        return roc_auc(p, y).auc;
      } catch (const ConfigError&) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    case Task::seg_cls: return threshold_sweep(p, y).best_csi;
    case Task::reg:
    case Task::seg_reg: {
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - y[i]);
      return -s / static_cast<double>(p.size());
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace stormnet
