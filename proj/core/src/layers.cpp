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

#include "stormnet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::pool2d: return "pool2d";
    case LayerKind::upsample: return "upsample";
    case LayerKind::concat: return "concat";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dropout: return "dropout";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::activation: return "activation";
    case LayerKind::channel_mask: return "channel_mask";
  }
  return "?";
}

std::string to_string(PoolMode mode) { return mode == PoolMode::max ? "max" : "average"; }

PoolMode pool_mode_from_string(std::string_view name) {
  if (name == "max") return PoolMode::max;
  if (name == "average" || name == "avg") return PoolMode::average;
  throw ConfigError("unknown pooling mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- Layer

Tensor Layer::forward(const Tensor& x, Mode mode) {
  const Tensor* in[] = {&x};
  return forward(std::span<const Tensor* const>(in), mode);
}

Tensor Layer::backward(const Tensor& grad_out) { return std::move(backward(grad_out, true).front()); }

Shape Layer::output_shape(const Shape& input) const {
  const Shape in[] = {input};
  return output_shape(std::span<const Shape>(in));
}

Param& Layer::add_param(std::string name, Shape shape) {
  Tensor zeros(shape);
  params_.push_back(Param{std::move(name), zeros, zeros});
  return params_.back();
}

void Layer::require_cache(const Tensor& grad_out) const {
  if (!cached_) throw ShapeError(to_string(kind()) + ": backward called without a matching forward");
  if (grad_out.shape() != cached_out_shape_) {
    throw ShapeError(to_string(kind()) + ": gradient shape " + shape_str(grad_out.shape()) +
                     " does not match forward output " + shape_str(cached_out_shape_));
  }
}

void Layer::mark_cached(const Shape& out_shape) {
  cached_ = true;
  cached_out_shape_ = out_shape;
}

namespace {

void require_arity(std::span<const Tensor* const> inputs, std::size_t n, LayerKind kind) {
  if (inputs.size() != n) {
    throw ShapeError(to_string(kind) + " expects " + std::to_string(n) + " input(s), got " +
                     std::to_string(inputs.size()));
  }
}

void require_image(const Shape& s, LayerKind kind, bool batched) {
  if (s.size() != (batched ? 4u : 3u)) {
    throw ShapeError(to_string(kind) + " expects " + (batched ? "[B,H,W,C]" : "[H,W,C]") + ", got " +
                     shape_str(s));
  }
}

double he_limit(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out, ActivationKind act) : in_(in), out_(out), act_(act) {
  if (in == 0 || out == 0) throw ConfigError("dense layer widths must be positive");
  add_param("w", {in, out});
  add_param("b", {out});
}

void Dense::initialize(Rng& rng) {
  const double lim = he_limit(in_);
  for (auto& w : weight().data()) w = rng.uniform(-lim, lim);
  bias().fill(0.0);
}

Shape Dense::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1 || inputs[0].size() != 1 || inputs[0][0] != in_) {
    throw ShapeError("dense expects input [" + std::to_string(in_) + "], got " +
                     (inputs.empty() ? std::string("nothing") : shape_str(inputs[0])));
  }
  return {out_};
}

Tensor Dense::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw ShapeError("dense: input " + shape_str(x.shape()) + " does not have width " + std::to_string(in_));
  }
  x_ = x;
  pre_ = add_last_axis(matmul(x, params_[0].value), params_[1].value);
  y_ = apply_activation(act_, pre_);
  mark_cached(y_.shape());
  return y_;
}

std::vector<Tensor> Dense::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  const std::size_t batch = x_.dim(0);
  Tensor g(pre_.shape());
  activate_backward(act_, pre_.data(), y_.data(), grad_out.data(), g.data(), out_);

  Tensor& gw = params_[0].grad;
  Tensor& gb = params_[1].grad;
  gw.fill(0.0);
  gb.fill(0.0);
  const double* px = x_.raw();
  const double* pg = g.raw();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* grow = pg + b * out_;
    for (std::size_t i = 0; i < in_; ++i) {
      const double xi = px[b * in_ + i];
      double* gwrow = gw.raw() + i * out_;
      for (std::size_t j = 0; j < out_; ++j) gwrow[j] += xi * grow[j];
    }
    for (std::size_t j = 0; j < out_; ++j) gb[j] += grow[j];
  }

  std::vector<Tensor> result(1);
  if (need_input_grad) {
    Tensor gx({batch, in_});
    const double* pw = params_[0].value.raw();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* grow = pg + b * out_;
      for (std::size_t i = 0; i < in_; ++i) {
        const double* wrow = pw + i * out_;
        double s = 0.0;
        for (std::size_t j = 0; j < out_; ++j) s += wrow[j] * grow[j];
        gx[b * in_ + i] = s;
      }
    }
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(std::size_t in_channels, std::size_t filters, std::size_t kernel, ActivationKind act)
    : cin_(in_channels), cout_(filters), k_(kernel), act_(act) {
  if (kernel % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(kernel));
  if (in_channels == 0 || filters == 0) throw ConfigError("conv2d channel counts must be positive");
  add_param("w", {kernel, kernel, in_channels, filters});
  add_param("b", {filters});
}

void Conv2D::initialize(Rng& rng) {
  const double lim = he_limit(k_ * k_ * cin_);
  for (auto& w : weight().data()) w = rng.uniform(-lim, lim);
  bias().fill(0.0);
}

Shape Conv2D::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("conv2d expects one input");
  require_image(inputs[0], kind(), false);
  if (inputs[0][2] != cin_) {
    throw ShapeError("conv2d expects " + std::to_string(cin_) + " input channels, got " + shape_str(inputs[0]));
  }
  return {inputs[0][0], inputs[0][1], cout_};
}

Tensor Conv2D::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  require_image(x.shape(), kind(), true);
  if (x.dim(3) != cin_) {
    throw ShapeError("conv2d expects " + std::to_string(cin_) + " input channels, got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k_ / 2);
  x_ = x;
  pre_ = Tensor({batch, h, w, cout_});
  const double* px = x.raw();
  const double* pw = params_[0].value.raw();
  const double* pb = params_[1].value.raw();
  double* po = pre_.raw();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        double* out = po + ((b * h + y) * w + xx) * cout_;
        std::copy(pb, pb + cout_, out);
        for (std::size_t dy = 0; dy < k_; ++dy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + dy) - r;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dx = 0; dx < k_; ++dx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xx + dx) - r;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* in = px + ((b * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * cin_;
            const double* wk = pw + (dy * k_ + dx) * cin_ * cout_;
            for (std::size_t ci = 0; ci < cin_; ++ci) {
              const double v = in[ci];
              const double* wrow = wk + ci * cout_;
              for (std::size_t co = 0; co < cout_; ++co) out[co] += v * wrow[co];
            }
          }
        }
      }
  y_ = apply_activation(act_, pre_);
  mark_cached(y_.shape());
  return y_;
}

std::vector<Tensor> Conv2D::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  const std::size_t batch = x_.dim(0), h = x_.dim(1), w = x_.dim(2);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k_ / 2);
  Tensor g(pre_.shape());
  activate_backward(act_, pre_.data(), y_.data(), grad_out.data(), g.data(), cout_);

  Tensor& gw = params_[0].grad;
  Tensor& gb = params_[1].grad;
  gw.fill(0.0);
  gb.fill(0.0);
  Tensor gx;
  if (need_input_grad) gx = Tensor(x_.shape());

  const double* px = x_.raw();
  const double* pw = params_[0].value.raw();
  const double* pg = g.raw();
  double* pgw = gw.raw();
  double* pgx = need_input_grad ? gx.raw() : nullptr;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double* go = pg + ((b * h + y) * w + xx) * cout_;
        for (std::size_t co = 0; co < cout_; ++co) gb[co] += go[co];
        for (std::size_t dy = 0; dy < k_; ++dy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + dy) - r;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dx = 0; dx < k_; ++dx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xx + dx) - r;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t in_off =
                ((b * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * cin_;
            const double* in = px + in_off;
            const std::size_t wk = (dy * k_ + dx) * cin_ * cout_;
            for (std::size_t ci = 0; ci < cin_; ++ci) {
              const double v = in[ci];
              double* gwrow = pgw + wk + ci * cout_;
              for (std::size_t co = 0; co < cout_; ++co) gwrow[co] += v * go[co];
            }
            if (pgx) {
              double* gin = pgx + in_off;
              for (std::size_t ci = 0; ci < cin_; ++ci) {
                const double* wrow = pw + wk + ci * cout_;
                double s = 0.0;
                for (std::size_t co = 0; co < cout_; ++co) s += wrow[co] * go[co];
                gin[ci] += s;
              }
            }
          }
        }
      }
  consume_cache();
  std::vector<Tensor> result;
  result.push_back(std::move(gx));
  return result;
}

// ---------------------------------------------------------------- Pool2D

Shape Pool2D::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("pool2d expects one input");
  require_image(inputs[0], kind(), false);
  if (inputs[0][0] % 2 || inputs[0][1] % 2) {
    throw ShapeError("pool2d needs even spatial extents, got " + shape_str(inputs[0]));
  }
  return {inputs[0][0] / 2, inputs[0][1] / 2, inputs[0][2]};
}

Tensor Pool2D::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  require_image(x.shape(), kind(), true);
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (h % 2 || w % 2) throw ShapeError("pool2d needs even spatial extents, got " + shape_str(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  in_shape_ = x.shape();
  Tensor out({batch, oh, ow, c});
  if (mode_ == PoolMode::max) argmax_.assign(out.size(), 0);
  const double* px = x.raw();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t o = ((b * oh + y) * ow + xx) * c + ch;
          const std::size_t base = ((b * h + 2 * y) * w + 2 * xx) * c + ch;
          const std::size_t offs[4] = {base, base + c, base + w * c, base + w * c + c};
          if (mode_ == PoolMode::max) {
            std::size_t best = offs[0];
            for (std::size_t t = 1; t < 4; ++t)
              if (px[offs[t]] > px[best]) best = offs[t];
            out[o] = px[best];
            argmax_[o] = best;
          } else {
            out[o] = 0.25 * (px[offs[0]] + px[offs[1]] + px[offs[2]] + px[offs[3]]);
          }
        }
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> Pool2D::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    Tensor gx(in_shape_);
    if (mode_ == PoolMode::max) {
      for (std::size_t o = 0; o < grad_out.size(); ++o) gx[argmax_[o]] += grad_out[o];
    } else {
      const std::size_t batch = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
      const std::size_t oh = h / 2, ow = w / 2;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double v = 0.25 * grad_out[((b * oh + y) * ow + xx) * c + ch];
              const std::size_t base = ((b * h + 2 * y) * w + 2 * xx) * c + ch;
              gx[base] += v;
              gx[base + c] += v;
              gx[base + w * c] += v;
              gx[base + w * c + c] += v;
            }
    }
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Upsample2D

Shape Upsample2D::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("upsample expects one input");
  require_image(inputs[0], kind(), false);
  return {inputs[0][0] * 2, inputs[0][1] * 2, inputs[0][2]};
}

Tensor Upsample2D::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  require_image(x.shape(), kind(), true);
  const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  in_shape_ = x.shape();
  const std::size_t oh = 2 * h, ow = 2 * w;
  Tensor out({batch, oh, ow, c});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* src = x.raw() + ((b * h + y / 2) * w + xx / 2) * c;
        std::copy(src, src + c, out.raw() + ((b * oh + y) * ow + xx) * c);
      }
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> Upsample2D::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    const std::size_t batch = in_shape_[0], h = in_shape_[1], w = in_shape_[2], c = in_shape_[3];
    const std::size_t oh = 2 * h, ow = 2 * w;
    Tensor gx(in_shape_);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const double* src = grad_out.raw() + ((b * oh + y) * ow + xx) * c;
          double* dst = gx.raw() + ((b * h + y / 2) * w + xx / 2) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Concat

Shape Concat::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 2) throw ShapeError("concat expects two inputs");
  require_image(inputs[0], kind(), false);
  require_image(inputs[1], kind(), false);
  if (inputs[0][0] != inputs[1][0] || inputs[0][1] != inputs[1][1]) {
    throw ShapeError("concat: spatial mismatch " + shape_str(inputs[0]) + " vs " + shape_str(inputs[1]));
  }
  return {inputs[0][0], inputs[0][1], inputs[0][2] + inputs[1][2]};
}

Tensor Concat::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 2, kind());
  const Tensor& a = *inputs[0];
  const Tensor& b = *inputs[1];
  require_image(a.shape(), kind(), true);
  require_image(b.shape(), kind(), true);
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat: batch/spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  a_shape_ = a.shape();
  b_shape_ = b.shape();
  const std::size_t ca = a.dim(3), cb = b.dim(3), pixels = a.size() / ca;
  Tensor out({a.dim(0), a.dim(1), a.dim(2), ca + cb});
  for (std::size_t p = 0; p < pixels; ++p) {
    double* dst = out.raw() + p * (ca + cb);
    std::copy(a.raw() + p * ca, a.raw() + (p + 1) * ca, dst);
    if (!zero_second_) std::copy(b.raw() + p * cb, b.raw() + (p + 1) * cb, dst + ca);
  }
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> Concat::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(2);
  if (need_input_grad) {
    const std::size_t ca = a_shape_[3], cb = b_shape_[3], pixels = shape_size(a_shape_) / ca;
    Tensor ga(a_shape_), gb(b_shape_);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double* src = grad_out.raw() + p * (ca + cb);
      std::copy(src, src + ca, ga.raw() + p * ca);
      if (!zero_second_) std::copy(src + ca, src + ca + cb, gb.raw() + p * cb);
    }
    result[0] = std::move(ga);
    result[1] = std::move(gb);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Flatten

Shape Flatten::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("flatten expects one input");
  return {shape_size(inputs[0])};
}

Tensor Flatten::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  if (x.rank() < 2) throw ShapeError("flatten expects a batched input, got " + shape_str(x.shape()));
  in_shape_ = x.shape();
  Tensor out = x.reshaped({x.dim(0), x.size() / x.dim(0)});
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> Flatten::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) result[0] = grad_out.reshaped(in_shape_);
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0,1)");
}

Shape Dropout::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("dropout expects one input");
  return inputs[0];
}

Tensor Dropout::forward(std::span<const Tensor* const> inputs, Mode mode) {
  require_arity(inputs, 1, kind());
  Tensor out = *inputs[0];
  mask_.clear();
  if (mode == Mode::train && rate_ > 0.0) {
    const double keep_scale = 1.0 / (1.0 - rate_);
    mask_.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      mask_[i] = rng_.uniform() < rate_ ? 0.0 : keep_scale;
      out[i] *= mask_[i];
    }
  }
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> Dropout::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    Tensor gx = grad_out;
    if (!mask_.empty())
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask_[i];
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t features) : features_(features) {
  if (features == 0) throw ConfigError("batchnorm needs at least one feature");
  add_param("gamma", {features});
  add_param("beta", {features});
  params_[0].value.fill(1.0);
  buffers_.push_back(Buffer{"running_mean", Tensor({features}, 0.0)});
  buffers_.push_back(Buffer{"running_var", Tensor({features}, 1.0)});
}

void BatchNorm::initialize(Rng&) {
  gamma().fill(1.0);
  beta().fill(0.0);
  running_mean().fill(0.0);
  running_var().fill(1.0);
}

Shape BatchNorm::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1 || inputs[0].empty() || inputs[0].back() != features_) {
    throw ShapeError("batchnorm expects last axis " + std::to_string(features_));
  }
  return inputs[0];
}

Tensor BatchNorm::forward(std::span<const Tensor* const> inputs, Mode mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  if (x.rank() < 2 || x.shape().back() != features_) {
    throw ShapeError("batchnorm expects last axis " + std::to_string(features_) + ", got " + shape_str(x.shape()));
  }
  const std::size_t c = features_;
  const std::size_t rows = x.size() / c;
  last_mode_ = mode;
  const double* gamma = params_[0].value.raw();
  const double* beta = params_[1].value.raw();
  std::vector<double> mu(c, 0.0), var(c, 0.0);
  if (mode == Mode::train) {
    if (x.dim(0) < 2) throw ShapeError("batchnorm training needs a batch of at least 2");
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) mu[j] += x[r * c + j];
    for (auto& m : mu) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = x[r * c + j] - mu[j];
        var[j] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(rows);
    double* rm = buffers_[0].value.raw();
    double* rv = buffers_[1].value.raw();
    for (std::size_t j = 0; j < c; ++j) {
      rm[j] = kMomentum * rm[j] + (1.0 - kMomentum) * mu[j];
      rv[j] = kMomentum * rv[j] + (1.0 - kMomentum) * var[j];
    }
  } else {
    mu.assign(buffers_[0].value.data().begin(), buffers_[0].value.data().end());
    var.assign(buffers_[1].value.data().begin(), buffers_[1].value.data().end());
  }
  inv_std_.resize(c);
  for (std::size_t j = 0; j < c; ++j) inv_std_[j] = 1.0 / std::sqrt(var[j] + kEpsilon);
  xhat_ = Tensor(x.shape());
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t i = r * c + j;
      xhat_[i] = (x[i] - mu[j]) * inv_std_[j];
      out[i] = gamma[j] * xhat_[i] + beta[j];
    }
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> BatchNorm::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  const std::size_t c = features_;
  const std::size_t rows = grad_out.size() / c;
  Tensor& ggamma = params_[0].grad;
  Tensor& gbeta = params_[1].grad;
  ggamma.fill(0.0);
  gbeta.fill(0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      ggamma[j] += grad_out[r * c + j] * xhat_[r * c + j];
      gbeta[j] += grad_out[r * c + j];
    }
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    const double* gamma = params_[0].value.raw();
    Tensor gx(grad_out.shape());
    if (last_mode_ == Mode::train) {
      const double n = static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t i = r * c + j;
          gx[i] = gamma[j] * inv_std_[j] / n * (n * grad_out[i] - gbeta[j] - xhat_[i] * ggamma[j]);
        }
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) gx[r * c + j] = grad_out[r * c + j] * gamma[j] * inv_std_[j];
    }
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- Activation

Shape Activation::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1) throw ShapeError("activation expects one input");
  return inputs[0];
}

Tensor Activation::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  pre_ = *inputs[0];
  y_ = apply_activation(act_, pre_);
  mark_cached(y_.shape());
  return y_;
}

std::vector<Tensor> Activation::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    Tensor gx(pre_.shape());
    activate_backward(act_, pre_.data(), y_.data(), grad_out.data(), gx.data(), pre_.shape().back());
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

// ---------------------------------------------------------------- ChannelMask

Shape ChannelMask::output_shape(std::span<const Shape> inputs) const {
  if (inputs.size() != 1 || inputs[0].empty() || inputs[0].back() != mask_.size()) {
    throw ShapeError("channel mask expects last axis " + std::to_string(mask_.size()));
  }
  return inputs[0];
}

Tensor ChannelMask::forward(std::span<const Tensor* const> inputs, Mode) {
  require_arity(inputs, 1, kind());
  const Tensor& x = *inputs[0];
  const std::size_t c = mask_.size();
  if (x.shape().back() != c) throw ShapeError("channel mask expects last axis " + std::to_string(c));
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i % c];
  mark_cached(out.shape());
  return out;
}

std::vector<Tensor> ChannelMask::backward(const Tensor& grad_out, bool need_input_grad) {
  require_cache(grad_out);
  std::vector<Tensor> result(1);
  if (need_input_grad) {
    const std::size_t c = mask_.size();
    Tensor gx = grad_out;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask_[i % c];
    result[0] = std::move(gx);
  }
  consume_cache();
  return result;
}

}  // namespace stormnet
