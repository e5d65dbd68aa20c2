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

#include <string>

#include "stormnet/metrics.hpp"
#include "stormnet/model.hpp"
#include "stormnet/task.hpp"

namespace stormnet {

/// Scores \p predictions of \p data. Scalar models use image mode; map models
/// use pixel (every pixel one case) or image_sum (per-image sum for counts,
/// max pixel probability for lightning/no lightning).
EvalReport evaluate_predictions(const Tensor& predictions, const TaskData& data, bool map_output, EvalMode mode,
                                double step = 0.05);

EvalReport evaluate(Model& model, const TaskData& data, EvalMode mode, double step = 0.05);

/// Map-output models only.
EvalReport evaluate_unet(Model& model, const TaskData& data, EvalMode mode, double step = 0.05);

/// The mode a model is evaluated in when none is requested.
EvalMode default_mode(const Model& model);

/// Model-selection score, larger is better: auc (cls), max csi of the pixel
/// sweep (seg_cls), -mae (reg, seg_reg per pixel). NaN when undefined.
double validation_metric(Task task, const Tensor& predictions, const Tensor& targets);

}  // namespace stormnet
