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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/layers.hpp"
#include "stormnet/optim.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

enum class ModelKind { perceptron, mlp, cnn, unet };

/// Output head. linear_map keeps counts non-negative through a softplus.
enum class OutputKind { sigmoid_scalar, linear_scalar, sigmoid_map, linear_map };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);
std::string to_string(OutputKind kind);
OutputKind output_kind_from_string(std::string_view name);

bool is_map_output(OutputKind kind);
bool is_probability_output(OutputKind kind);

struct ConvBlock {
  std::size_t filters = 8;
  std::size_t count = 1;  // convolutions before the pool

  bool operator==(const ConvBlock&) const = default;
};

/// Declarative architecture description.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  Shape input_shape;                        // per sample: [n] or [H, W, C]
  std::vector<std::size_t> hidden_layers;   // mlp widths; dense head for cnn
  std::vector<ConvBlock> conv_blocks;       // cnn
  std::size_t kernel_size = 3;
  std::size_t depth = 3;                    // unet pool levels
  std::size_t base_filters = 8;             // unet first-level filters
  ActivationKind activation = ActivationKind::relu;
  PoolMode pool = PoolMode::max;
  double dropout_rate = 0.0;
  bool use_batchnorm = false;
  OutputKind output = OutputKind::sigmoid_scalar;
  std::vector<std::size_t> ignored_channels;  // zeroed at the input
  std::uint64_t seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

/// Declared defaults: cnn 8/16/32 filters with a [64] head, unet D=3 F=8,
/// mlp [64, 32].
ModelSpec default_spec(ModelKind kind, Shape input_shape, OutputKind output);

/// Throws ConfigError describing the first violated shape constraint.
void validate(const ModelSpec& spec);

/// Trainable parameter count computed from the spec alone.
std::size_t parameter_count(const ModelSpec& spec);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// Instantiated layer graph. Nodes are stored in topological order; the
/// last node is the output. Forward keeps every node output for backward.
class Model {
 public:
  static constexpr int kInput = -1;

  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;  // node indices or kInput
    Shape output_shape;       // per sample, inferred at build
  };

  explicit Model(ModelSpec spec);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  /// Output per sample: [1] for scalar heads, [H, W, 1] for map heads.
  const Shape& output_shape() const { return nodes_.back().output_shape; }
  bool map_output() const { return is_map_output(spec_.output); }

  Tensor forward(const Tensor& x);
  /// Inference-mode forward in chunks of \p batch; the mode is restored.
  Tensor predict(const Tensor& x, std::size_t batch = 64);
  /// Back-propagates \p grad_out through the last forward. Parameter
  /// gradients are overwritten; the input gradient is returned when asked for.
  Tensor backward(const Tensor& grad_out, bool need_input_grad = false);

  std::vector<ParamRef> param_refs();
  std::size_t num_parameters() const;

  /// Reseeds every stochastic layer from one seed (dropout masks).
  void reseed(std::uint64_t seed);

  /// Feeds zeros instead of the encoder tensors into every skip connection.
  void set_skip_connections(bool enabled);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  Layer& layer(std::size_t i) { return *nodes_.at(i).layer; }
  const Tensor& node_output(std::size_t i) const { return outputs_.at(i); }

  /// Named parameter and buffer tensors, for persistence.
  std::vector<std::pair<std::string, Tensor*>> state_tensors();

 private:
  int add(std::unique_ptr<Layer> layer, std::vector<int> inputs);
  void build();
  std::string tensor_name(std::size_t node, const std::string& local) const;

  ModelSpec spec_;
  Mode mode_ = Mode::inference;
  std::vector<Node> nodes_;
  std::vector<Tensor> outputs_;
};

/// Bundle encoding of a model (spec + every parameter and buffer).
std::vector<std::uint8_t> serialize(Model& model);
Model deserialize(std::span<const std::uint8_t> bytes);

void save_model(Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace stormnet
