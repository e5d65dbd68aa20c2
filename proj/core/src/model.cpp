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

#include "stormnet/model.hpp"

#include <algorithm>

#include "stormnet/container.hpp"
#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::perceptron: return "perceptron";
    case ModelKind::mlp: return "mlp";
    case ModelKind::cnn: return "cnn";
    case ModelKind::unet: return "unet";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "perceptron") return ModelKind::perceptron;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "cnn") return ModelKind::cnn;
  if (name == "unet") return ModelKind::unet;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(OutputKind kind) {
  switch (kind) {
    case OutputKind::sigmoid_scalar: return "sigmoid_scalar";
    case OutputKind::linear_scalar: return "linear_scalar";
    case OutputKind::sigmoid_map: return "sigmoid_map";
    case OutputKind::linear_map: return "linear_map";
  }
  return "?";
}

OutputKind output_kind_from_string(std::string_view name) {
  if (name == "sigmoid_scalar") return OutputKind::sigmoid_scalar;
  if (name == "linear_scalar") return OutputKind::linear_scalar;
  if (name == "sigmoid_map") return OutputKind::sigmoid_map;
  if (name == "linear_map") return OutputKind::linear_map;
  throw ConfigError("unknown output kind '" + std::string(name) + "'");
}

bool is_map_output(OutputKind kind) { return kind == OutputKind::sigmoid_map || kind == OutputKind::linear_map; }

bool is_probability_output(OutputKind kind) {
  return kind == OutputKind::sigmoid_scalar || kind == OutputKind::sigmoid_map;
}

namespace {

ActivationKind head_activation(OutputKind kind) {
  switch (kind) {
    case OutputKind::sigmoid_scalar:
    case OutputKind::sigmoid_map: return ActivationKind::sigmoid;
    case OutputKind::linear_scalar: return ActivationKind::linear;
    case OutputKind::linear_map: return ActivationKind::softplus;
  }
  return ActivationKind::linear;
}

std::size_t input_channels(const ModelSpec& spec) { return spec.input_shape.back(); }

}  // namespace

ModelSpec default_spec(ModelKind kind, Shape input_shape, OutputKind output) {
  ModelSpec s;
  s.kind = kind;
  s.input_shape = std::move(input_shape);
  s.output = output;
  switch (kind) {
    case ModelKind::perceptron:
      break;
    case ModelKind::mlp:
      s.hidden_layers = {64, 32};
      break;
    case ModelKind::cnn:
      s.conv_blocks = {{8, 1}, {16, 1}, {32, 1}};
      s.hidden_layers = {64};
      break;
    case ModelKind::unet:
      s.depth = 3;
      s.base_filters = 8;
      break;
  }
  return s;
}

void validate(const ModelSpec& spec) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0) {
    throw ConfigError("model input shape must be non-empty with positive extents");
  }
  for (auto e : spec.input_shape)
    if (e == 0) throw ConfigError("model input extents must be positive: " + shape_str(spec.input_shape));
  if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0,1)");
  for (auto c : spec.ignored_channels) {
    if (c >= input_channels(spec)) {
      throw ConfigError("ignored channel " + std::to_string(c) + " outside input " + shape_str(spec.input_shape));
    }
  }
  for (auto w : spec.hidden_layers)
    if (w == 0) throw ConfigError("hidden layer widths must be positive");

  const bool map = is_map_output(spec.output);
  if (spec.kind == ModelKind::unet && !map) throw ConfigError("unet needs a map output (sigmoid_map or linear_map)");
  if (spec.kind != ModelKind::unet && map) throw ConfigError(to_string(spec.kind) + " needs a scalar output");

  if (spec.kind == ModelKind::cnn || spec.kind == ModelKind::unet) {
    if (spec.input_shape.size() != 3) {
      throw ConfigError(to_string(spec.kind) + " needs an [H,W,C] input, got " + shape_str(spec.input_shape));
    }
    if (spec.kernel_size % 2 == 0) throw ConfigError("kernel size must be odd");
  }
  const std::size_t h = spec.input_shape[0];
  const std::size_t w = spec.input_shape.size() > 1 ? spec.input_shape[1] : 1;
  if (spec.kind == ModelKind::cnn) {
    if (spec.conv_blocks.empty()) throw ConfigError("cnn needs at least one conv block");
    const std::size_t f = std::size_t{1} << spec.conv_blocks.size();
    if (h % f || w % f) {
      throw ConfigError("cnn with " + std::to_string(spec.conv_blocks.size()) + " pools needs H and W divisible by " +
                        std::to_string(f) + ", got " + shape_str(spec.input_shape));
    }
    for (const auto& b : spec.conv_blocks)
      if (b.filters == 0 || b.count == 0) throw ConfigError("conv blocks need positive filters and count");
  }
  if (spec.kind == ModelKind::unet) {
    if (spec.depth < 1 || spec.depth > 4) throw ConfigError("unet depth must be in [1,4]");
    if (spec.base_filters == 0) throw ConfigError("unet base_filters must be positive");
    const std::size_t f = std::size_t{1} << spec.depth;
    if (h % f || w % f || h / f < 3 || w / f < 3) {
      throw ConfigError("unet depth " + std::to_string(spec.depth) + " needs H/2^D and W/2^D integral and >= 3, got " +
                        shape_str(spec.input_shape));
    }
  }
}

std::size_t parameter_count(const ModelSpec& spec) {
  validate(spec);
  const std::size_t k2 = spec.kernel_size * spec.kernel_size;
  const std::size_t bn = spec.use_batchnorm ? 2 : 0;
  auto dense = [&](std::size_t in, std::size_t out, bool hidden) {
    return in * out + out + (hidden ? bn * out : 0);
  };
  auto conv = [&](std::size_t in, std::size_t out, std::size_t k2_) { return k2_ * in * out + out + bn * out; };

  const std::size_t flat = shape_size(spec.input_shape);
  std::size_t total = 0;
  switch (spec.kind) {
    case ModelKind::perceptron:
      return flat + 1;
    case ModelKind::mlp: {
      std::size_t in = flat;
      for (auto w : spec.hidden_layers) {
        total += dense(in, w, true);
        in = w;
      }
      return total + in + 1;
    }
    case ModelKind::cnn: {
      std::size_t c = input_channels(spec);
      std::size_t h = spec.input_shape[0], w = spec.input_shape[1];
      for (const auto& b : spec.conv_blocks) {
        for (std::size_t i = 0; i < b.count; ++i) {
          total += conv(c, b.filters, k2);
          c = b.filters;
        }
        h /= 2;
        w /= 2;
      }
      std::size_t in = h * w * c;
      for (auto width : spec.hidden_layers) {
        total += dense(in, width, true);
        in = width;
      }
      return total + in + 1;
    }
    case ModelKind::unet: {
      std::size_t c = input_channels(spec);
      std::vector<std::size_t> skips;
      for (std::size_t l = 0; l < spec.depth; ++l) {
        const std::size_t f = spec.base_filters << l;
        total += conv(c, f, k2);
        skips.push_back(f);
        c = f;
      }
      const std::size_t fb = spec.base_filters << spec.depth;
      total += conv(c, fb, k2);
      c = fb;
      for (std::size_t l = spec.depth; l-- > 0;) {
        const std::size_t f = spec.base_filters << l;
        total += conv(c + skips[l], f, k2);
        c = f;
      }
      return total + c + 1;  // 1x1 head, no batch norm
    }
  }
  return total;
}

nlohmann::json to_json(const ModelSpec& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  j["input_shape"] = s.input_shape;
  j["hidden_layers"] = s.hidden_layers;
  auto blocks = nlohmann::json::array();
  for (const auto& b : s.conv_blocks) blocks.push_back({{"filters", b.filters}, {"count", b.count}});
  j["conv_blocks"] = blocks;
  j["kernel_size"] = s.kernel_size;
  j["depth"] = s.depth;
  j["base_filters"] = s.base_filters;
  j["activation"] = to_string(s.activation);
  j["pool"] = to_string(s.pool);
  j["dropout_rate"] = s.dropout_rate;
  j["use_batchnorm"] = s.use_batchnorm;
  j["output"] = to_string(s.output);
  j["ignored_channels"] = s.ignored_channels;
  j["seed"] = s.seed;
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    s.input_shape = j.at("input_shape").get<Shape>();
    s.hidden_layers = j.value("hidden_layers", std::vector<std::size_t>{});
    for (const auto& b : j.value("conv_blocks", nlohmann::json::array()))
      s.conv_blocks.push_back({b.at("filters").get<std::size_t>(), b.at("count").get<std::size_t>()});
    s.kernel_size = j.value("kernel_size", std::size_t{3});
    s.depth = j.value("depth", std::size_t{3});
    s.base_filters = j.value("base_filters", std::size_t{8});
    s.activation = activation_from_string(j.value("activation", std::string("relu")));
    s.pool = pool_mode_from_string(j.value("pool", std::string("max")));
    s.dropout_rate = j.value("dropout_rate", 0.0);
    s.use_batchnorm = j.value("use_batchnorm", false);
    s.output = output_kind_from_string(j.at("output").get<std::string>());
    s.ignored_channels = j.value("ignored_channels", std::vector<std::size_t>{});
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
}

// ---------------------------------------------------------------- Model

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  build();
}

Model::Model(const Model& other) : spec_(other.spec_), mode_(other.mode_), outputs_() {
  nodes_.reserve(other.nodes_.size());
  for (const auto& n : other.nodes_) nodes_.push_back(Node{n.layer->clone(), n.inputs, n.output_shape});
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

int Model::add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
  std::vector<Shape> in_shapes;
  for (int i : inputs) in_shapes.push_back(i == kInput ? spec_.input_shape : nodes_.at(static_cast<std::size_t>(i)).output_shape);
  Shape out;
  try {
    out = layer->output_shape(std::span<const Shape>(in_shapes));
  } catch (const ShapeError& e) {
    throw ConfigError("node " + std::to_string(nodes_.size()) + " (" + to_string(layer->kind()) + "): " + e.what());
  }
  nodes_.push_back(Node{std::move(layer), std::move(inputs), std::move(out)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Model::build() {
  const auto& s = spec_;
  int cur = kInput;
  auto shape_of = [&](int n) -> const Shape& {
    return n == kInput ? s.input_shape : nodes_[static_cast<std::size_t>(n)].output_shape;
  };

  if (!s.ignored_channels.empty()) {
    std::vector<double> mask(input_channels(s), 1.0);
    for (auto c : s.ignored_channels) mask[c] = 0.0;
    cur = add(std::make_unique<ChannelMask>(std::move(mask)), {cur});
  }

  auto dropout = [&](int in) {
    if (s.dropout_rate <= 0.0) return in;
    const auto seed = derive_seed(s.seed, nodes_.size(), 0xd0);
    return add(std::make_unique<Dropout>(s.dropout_rate, seed), {in});
  };
  auto hidden_dense = [&](int in, std::size_t width) {
    const std::size_t n = shape_of(in).front();
    if (!s.use_batchnorm) return dropout(add(std::make_unique<Dense>(n, width, s.activation), {in}));
    int d = add(std::make_unique<Dense>(n, width, ActivationKind::linear), {in});
    d = add(std::make_unique<BatchNorm>(width), {d});
    return dropout(add(std::make_unique<Activation>(s.activation), {d}));
  };
  auto conv = [&](int in, std::size_t filters) {
    const std::size_t c = shape_of(in).back();
    if (!s.use_batchnorm) return add(std::make_unique<Conv2D>(c, filters, s.kernel_size, s.activation), {in});
    int d = add(std::make_unique<Conv2D>(c, filters, s.kernel_size, ActivationKind::linear), {in});
    d = add(std::make_unique<BatchNorm>(filters), {d});
    return add(std::make_unique<Activation>(s.activation), {d});
  };
  auto flatten = [&](int in) {
    if (shape_of(in).size() == 1) return in;
    return add(std::make_unique<Flatten>(), {in});
  };
  auto head = [&](int in) {
    const std::size_t n = shape_of(in).front();
    return add(std::make_unique<Dense>(n, 1, head_activation(s.output)), {in});
  };

  switch (s.kind) {
    case ModelKind::perceptron:
      head(flatten(cur));
      break;
    case ModelKind::mlp:
      cur = flatten(cur);
      for (auto w : s.hidden_layers) cur = hidden_dense(cur, w);
      head(cur);
      break;
    case ModelKind::cnn:
      for (const auto& b : s.conv_blocks) {
        for (std::size_t i = 0; i < b.count; ++i) cur = conv(cur, b.filters);
        cur = add(std::make_unique<Pool2D>(s.pool), {cur});
      }
      cur = flatten(cur);
      for (auto w : s.hidden_layers) cur = hidden_dense(cur, w);
      head(cur);
      break;
    case ModelKind::unet: {
      std::vector<int> skips;
      for (std::size_t l = 0; l < s.depth; ++l) {
        cur = conv(cur, s.base_filters << l);
        skips.push_back(cur);
        cur = add(std::make_unique<Pool2D>(s.pool), {cur});
      }
      cur = dropout(conv(cur, s.base_filters << s.depth));
      for (std::size_t l = s.depth; l-- > 0;) {
        cur = add(std::make_unique<Upsample2D>(), {cur});
        cur = add(std::make_unique<Concat>(), {cur, skips[l]});
        cur = conv(cur, s.base_filters << l);
      }
      const std::size_t c = shape_of(cur).back();
      add(std::make_unique<Conv2D>(c, 1, 1, head_activation(s.output)), {cur});
      break;
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Rng rng(derive_seed(s.seed, i, 0x1417));
    nodes_[i].layer->initialize(rng);
  }
}

Tensor Model::forward(const Tensor& x) {
  Shape expected = spec_.input_shape;
  expected.insert(expected.begin(), x.rank() ? x.dim(0) : 0);
  if (x.shape() != expected) {
    throw ShapeError("model expects input " + shape_str(expected) + ", got " + shape_str(x.shape()));
  }
  outputs_.assign(nodes_.size(), Tensor{});
  std::vector<const Tensor*> ins;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    ins.clear();
    for (int j : nodes_[i].inputs) ins.push_back(j == kInput ? &x : &outputs_[static_cast<std::size_t>(j)]);
    outputs_[i] = nodes_[i].layer->forward(std::span<const Tensor* const>(ins), mode_);
  }
  return outputs_.back();
}

Tensor Model::predict(const Tensor& x, std::size_t batch) {
  const Mode saved = mode_;
  mode_ = Mode::inference;
  const std::size_t n = x.dim(0);
  const std::size_t per = x.size() / n;
  Shape out_shape = output_shape();
  out_shape.insert(out_shape.begin(), n);
  Tensor out(out_shape);
  const std::size_t out_per = out.size() / n;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t m = std::min(batch, n - start);
    Shape chunk_shape = x.shape();
    chunk_shape[0] = m;
    std::vector<double> chunk(x.data().begin() + static_cast<std::ptrdiff_t>(start * per),
                              x.data().begin() + static_cast<std::ptrdiff_t>((start + m) * per));
    const Tensor y = forward(Tensor(chunk_shape, std::move(chunk)));
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * out_per));
  }
  mode_ = saved;
  return out;
}

Tensor Model::backward(const Tensor& grad_out, bool need_input_grad) {
  if (outputs_.size() != nodes_.size()) throw ShapeError("model backward called before forward");
  std::vector<Tensor> grads(nodes_.size());
  Tensor input_grad;
  grads.back() = grad_out;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (grads[i].empty()) continue;
    const auto& node = nodes_[i];
    bool want = false;
    for (int j : node.inputs) want = want || j != kInput || need_input_grad;
    auto gin = node.layer->backward(grads[i], want);
    grads[i] = Tensor{};
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (gin[k].empty()) continue;
      const int j = node.inputs[k];
      Tensor& target = j == kInput ? input_grad : grads[static_cast<std::size_t>(j)];
      if (target.empty()) {
        target = std::move(gin[k]);
      } else {
        for (std::size_t e = 0; e < target.size(); ++e) target[e] += gin[k][e];
      }
    }
  }
  return input_grad;
}

std::string Model::tensor_name(std::size_t node, const std::string& local) const {
  return std::to_string(node) + "." + to_string(nodes_[node].layer->kind()) + "." + local;
}

std::vector<ParamRef> Model::param_refs() {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (auto& p : nodes_[i].layer->params()) refs.push_back(ParamRef{tensor_name(i, p.name), &p.value, &p.grad});
  return refs;
}

std::vector<std::pair<std::string, Tensor*>> Model::state_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto& p : nodes_[i].layer->params()) out.emplace_back(tensor_name(i, p.name), &p.value);
    for (auto& b : nodes_[i].layer->buffers()) out.emplace_back(tensor_name(i, b.name), &b.value);
  }
  return out;
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto& node : nodes_)
    for (const auto& p : node.layer->params()) n += p.value.size();
  return n;
}

void Model::reseed(std::uint64_t seed) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].layer->reseed(derive_seed(seed, i));
}

void Model::set_skip_connections(bool enabled) {
  for (auto& n : nodes_)
    if (auto* c = dynamic_cast<Concat*>(n.layer.get())) c->set_zero_second(!enabled);
}

// ---------------------------------------------------------------- persistence

namespace {
constexpr const char* kModelSection = "model_manifest.json";
}

std::vector<std::uint8_t> serialize(Model& model) {
  Bundle b;
  b.section = kModelSection;
  b.meta["kind"] = "model";
  b.meta["spec"] = to_json(model.spec());
  for (auto& [name, t] : model.state_tensors()) b.arrays.push_back(NamedArray{name, *t, DType::f64});
  return encode_bundle(b);
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  Bundle b = decode_bundle(bytes);
  if (b.section != kModelSection || !b.meta.contains("spec")) throw FormatError("container does not hold a model");
  Model model(spec_from_json(b.meta.at("spec")));
  auto state = model.state_tensors();
  for (auto& [name, t] : state) {
    auto it = std::find_if(b.arrays.begin(), b.arrays.end(), [&](const NamedArray& a) { return a.name == name; });
    if (it == b.arrays.end()) throw FormatError("model file is missing tensor '" + name + "'");
    if (it->value.shape() != t->shape()) {
      throw FormatError("tensor '" + name + "' has shape " + shape_str(it->value.shape()) + ", expected " +
                        shape_str(t->shape()));
    }
    *t = std::move(it->value);
  }
  return model;
}

void save_model(Model& model, const std::filesystem::path& path) { write_file_atomic(path, serialize(model)); }

Model load_model(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace stormnet
