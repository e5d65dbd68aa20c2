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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stormnet/data.hpp"
#include "stormnet/losses.hpp"
#include "stormnet/model.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

/// cls: any lightning in the image. reg: flash count of the image.
/// seg_cls / seg_reg: the same per pixel.
enum class Task { cls, reg, seg_cls, seg_reg };

std::string to_string(Task task);
Task task_from_string(std::string_view name);
bool is_segmentation(Task task);
bool is_classification(Task task);

enum class InputKind { image, engineered };

std::string to_string(InputKind kind);

OutputKind output_for(Task task);
Loss default_loss(Task task);

/// Model-ready inputs and targets of one split.
struct TaskData {
  Task task = Task::cls;
  InputKind input = InputKind::image;
  Tensor inputs;   // [N, 48, 48, C] or [N, 36]
  Tensor targets;  // [N, 1] or [N, 48, 48, 1]
  std::vector<std::size_t> source_index;  // sample index in the split

  std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
  Shape input_shape() const;
  TaskData subset(std::span<const std::size_t> rows) const;
};

/// Rows \p rows of a batched tensor, in that order.
Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows);

/// [N, H, W, 4] images to their [N, 36] percentile features.
Tensor engineered_features(const Tensor& images);

/// Image-level regression keeps only images with at least one flash.
TaskData make_task_data(const Split& split, Task task, InputKind input);

}  // namespace stormnet
