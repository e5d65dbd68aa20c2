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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stormnet/activation.hpp"
#include "stormnet/rng.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

enum class Mode { train, inference };

enum class LayerKind {
  dense,
  conv2d,
  pool2d,
  upsample,
  concat,
  flatten,
  dropout,
  batchnorm,
  activation,
  channel_mask,
};

std::string to_string(LayerKind kind);

enum class PoolMode { max, average };

std::string to_string(PoolMode mode);
PoolMode pool_mode_from_string(std::string_view name);

/// Trainable tensor with its most recent gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Non-trainable state that still has to be persisted (batch-norm running
/// statistics).
struct Buffer {
  std::string name;
  Tensor value;
};

/// A differentiable node. Shapes passed to output_shape() exclude the batch
/// axis; tensors passed to forward() include it.
///
/// backward() consumes the cache written by the preceding forward() and
/// overwrites every parameter gradient.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::size_t arity() const { return 1; }
  virtual Shape output_shape(std::span<const Shape> inputs) const = 0;
  virtual Tensor forward(std::span<const Tensor* const> inputs, Mode mode) = 0;
  /// One gradient per input. Input gradients are left empty when
  /// \p need_input_grad is false.
  virtual std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// He-uniform weights from \p rng, zero biases. No-op for parameterless layers.
  virtual void initialize(Rng& rng) { (void)rng; }
  virtual void reseed(std::uint64_t seed) { (void)seed; }

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Shape output_shape(const Shape& input) const;

  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  std::vector<Buffer>& buffers() noexcept { return buffers_; }
  const std::vector<Buffer>& buffers() const noexcept { return buffers_; }

 protected:
  Param& add_param(std::string name, Shape shape);
  void require_cache(const Tensor& grad_out) const;
  void mark_cached(const Shape& out_shape);
  void consume_cache() { cached_ = false; }

  std::vector<Param> params_;
  std::vector<Buffer> buffers_;

 private:
  bool cached_ = false;
  Shape cached_out_shape_;
};

/// out = act(x W + b) for x of shape [B, n]; W is [n, m], b is [m].
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, ActivationKind act);

  LayerKind kind() const override { return LayerKind::dense; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  void initialize(Rng& rng) override;

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  ActivationKind activation() const noexcept { return act_; }
  Tensor& weight() { return params_[0].value; }
  Tensor& bias() { return params_[1].value; }

 private:
  std::size_t in_, out_;
  ActivationKind act_;
  Tensor x_, pre_, y_;
};

/// Stride-1 "same" convolution with zero padding of kernel/2 on every edge.
///
/// Weights are [k, k, Cin, Cout]; each filter sums its window over all input
/// channels. Windows are cross-correlations: weight (dy, dx) multiplies the
/// pixel at offset (dy - k/2, dx - k/2).
class Conv2D final : public Layer {
 public:
  Conv2D(std::size_t in_channels, std::size_t filters, std::size_t kernel, ActivationKind act);

  LayerKind kind() const override { return LayerKind::conv2d; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }
  void initialize(Rng& rng) override;

  std::size_t in_channels() const noexcept { return cin_; }
  std::size_t filters() const noexcept { return cout_; }
  std::size_t kernel() const noexcept { return k_; }
  ActivationKind activation() const noexcept { return act_; }
  Tensor& weight() { return params_[0].value; }
  Tensor& bias() { return params_[1].value; }

 private:
  std::size_t cin_, cout_, k_;
  ActivationKind act_;
  Tensor x_, pre_, y_;
};

/// Non-overlapping 2x2 pooling; H and W must be even.
class Pool2D final : public Layer {
 public:
  explicit Pool2D(PoolMode mode) : mode_(mode) {}

  LayerKind kind() const override { return LayerKind::pool2d; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Pool2D>(*this); }

  PoolMode mode() const noexcept { return mode_; }
  /// Flat input offsets of each window maximum from the last max forward.
  const std::vector<std::size_t>& argmax() const noexcept { return argmax_; }

 private:
  PoolMode mode_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Nearest-neighbour 2x upsampling: every pixel becomes a 2x2 block.
class Upsample2D final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::upsample; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2D>(*this); }

 private:
  Shape in_shape_;
};

/// Channel concatenation of two images with equal batch and spatial extents.
class Concat final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::concat; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  std::size_t arity() const override { return 2; }
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Concat>(*this); }

  /// Replaces the second input by zeros in forward (skip-connection ablation).
  void set_zero_second(bool zero) noexcept { zero_second_ = zero; }

 private:
  Shape a_shape_, b_shape_;
  bool zero_second_ = false;
};

class Flatten final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape in_shape_;
};

/// Inverted dropout: survivors are scaled by 1/(1 - rate) in training so
/// inference is the identity.
class Dropout final : public Layer {
 public:
  Dropout(double rate, std::uint64_t seed);

  LayerKind kind() const override { return LayerKind::dropout; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  Rng rng_;
  std::vector<double> mask_;  // empty means identity
};

/// Per-feature standardization over every axis but the last.
///
/// Training uses batch statistics (biased variance) and folds them into the
/// running estimates with the given momentum; inference uses the running
/// estimates.
class BatchNorm final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.99;

  explicit BatchNorm(std::size_t features);

  LayerKind kind() const override { return LayerKind::batchnorm; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
  void initialize(Rng& rng) override;

  std::size_t features() const noexcept { return features_; }
  Tensor& gamma() { return params_[0].value; }
  Tensor& beta() { return params_[1].value; }
  Tensor& running_mean() { return buffers_[0].value; }
  Tensor& running_var() { return buffers_[1].value; }

 private:
  std::size_t features_;
  Mode last_mode_ = Mode::inference;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class Activation final : public Layer {
 public:
  explicit Activation(ActivationKind act) : act_(act) {}

  LayerKind kind() const override { return LayerKind::activation; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Activation>(*this); }

  ActivationKind activation() const noexcept { return act_; }

 private:
  ActivationKind act_;
  Tensor pre_, y_;
};

/// Multiplies each channel of the last axis by a fixed 0/1 mask, so masked
/// channels are structurally ignored by everything downstream.
class ChannelMask final : public Layer {
 public:
  explicit ChannelMask(std::vector<double> mask) : mask_(std::move(mask)) {}

  LayerKind kind() const override { return LayerKind::channel_mask; }
  using Layer::backward;
  using Layer::forward;
  using Layer::output_shape;
  Shape output_shape(std::span<const Shape> inputs) const override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode) override;
  std::vector<Tensor> backward(const Tensor& grad_out, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ChannelMask>(*this); }

 private:
  std::vector<double> mask_;
};

}  // namespace stormnet
