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

#include "stormnet/task.hpp"

#include <algorithm>

#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(Task task) {
  switch (task) {
    case Task::cls: return "cls";
    case Task::reg: return "reg";
    case Task::seg_cls: return "seg_cls";
    case Task::seg_reg: return "seg_reg";
  }
  return "?";
}

Task task_from_string(std::string_view name) {
  if (name == "cls") return Task::cls;
  if (name == "reg") return Task::reg;
  if (name == "seg_cls") return Task::seg_cls;
  if (name == "seg_reg") return Task::seg_reg;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected cls, reg, seg_cls or seg_reg)");
}

bool is_segmentation(Task task) { return task == Task::seg_cls || task == Task::seg_reg; }
bool is_classification(Task task) { return task == Task::cls || task == Task::seg_cls; }

std::string to_string(InputKind kind) { return kind == InputKind::image ? "image" : "engineered"; }

OutputKind output_for(Task task) {
  switch (task) {
    case Task::cls: return OutputKind::sigmoid_scalar;
    case Task::reg: return OutputKind::linear_scalar;
    case Task::seg_cls: return OutputKind::sigmoid_map;
    case Task::seg_reg: return OutputKind::linear_map;
  }
  return OutputKind::sigmoid_scalar;
}

Loss default_loss(Task task) {
  return is_classification(task) ? Loss{LossKind::bce, 1.0} : Loss{LossKind::mse, 1.0};
}

Shape TaskData::input_shape() const {
  Shape s = inputs.shape();
  s.erase(s.begin());
  return s;
}

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() < 1) throw ShapeError("take_rows needs a batched tensor");
  const std::size_t n = t.dim(0), stride = t.size() / n;
  std::vector<double> out;
  out.reserve(rows.size() * stride);
  for (auto r : rows) {
    if (r >= n) throw ShapeError("row " + std::to_string(r) + " out of range for " + shape_str(t.shape()));
    const auto first = t.data().begin() + static_cast<std::ptrdiff_t>(r * stride);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(stride));
  }
  Shape s = t.shape();
  s[0] = rows.size();
  if (rows.empty()) return Tensor();
  return Tensor(s, std::move(out));
}

TaskData TaskData::subset(std::span<const std::size_t> rows) const {
  TaskData d;
  d.task = task;
  d.input = input;
  d.inputs = take_rows(inputs, rows);
  d.targets = take_rows(targets, rows);
  for (auto r : rows) d.source_index.push_back(source_index.at(r));
  return d;
}

Tensor engineered_features(const Tensor& images) {
  if (images.rank() != 4) throw ShapeError("engineered features expect [N,H,W,C], got " + shape_str(images.shape()));
  const std::size_t n = images.dim(0), stride = images.size() / n;
  Tensor out({n, kNumFeatures});
  const Shape one{images.dim(1), images.dim(2), images.dim(3)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = images.data().begin() + static_cast<std::ptrdiff_t>(i * stride);
    const Tensor f = extract_percentiles(Tensor(one, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride))));
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * kNumFeatures));
  }
  return out;
}

TaskData make_task_data(const Split& split, Task task, InputKind input) {
  if (split.size() == 0) throw ConfigError("split '" + split.name + "' is empty");
  if (is_segmentation(task) && input != InputKind::image) {
    throw ConfigError("segmentation tasks need image inputs");
  }
  const std::size_t n = split.size(), h = split.flashes.dim(1), w = split.flashes.dim(2), pixels = h * w;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    double count = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) count += split.flashes[i * pixels + p];
    if (task != Task::reg || count >= 1.0) rows.push_back(i);
  }
  if (rows.empty()) throw ConfigError("split '" + split.name + "' has no usable samples for task " + to_string(task));

  TaskData d;
  d.task = task;
  d.input = input;
  d.source_index = rows;
  const Tensor images = rows.size() == n ? split.images : take_rows(split.images, rows);
  d.inputs = input == InputKind::image ? images : engineered_features(images);

  const Tensor flashes = rows.size() == n ? split.flashes : take_rows(split.flashes, rows);
  const std::size_t m = rows.size();
  if (is_segmentation(task)) {
    d.targets = Tensor({m, h, w, 1});
    for (std::size_t i = 0; i < flashes.size(); ++i) {
      d.targets[i] = task == Task::seg_cls ? (flashes[i] >= 1.0 ? 1.0 : 0.0) : flashes[i];
    }
  } else {
    d.targets = Tensor({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
      double count = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) count += flashes[i * pixels + p];
      d.targets[i] = task == Task::cls ? (count >= 1.0 ? 1.0 : 0.0) : count;
    }
  }
  return d;
}

}  // namespace stormnet
