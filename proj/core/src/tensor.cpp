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

#include "stormnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stormnet/errors.hpp"

namespace stormnet {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename Fn>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, Fn fn) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i], y[i]);
  check_finite(out, op);
  return out;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match shape " +
                     shape_str(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for shape " + shape_str(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  validate_shape(shape);
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  check_finite(out, "scale");
  return out;
}

Tensor add_scalar(const Tensor& a, double value) {
  Tensor out = a;
  for (auto& v : out.data()) v += value;
  check_finite(out, "add_scalar");
  return out;
}

Tensor map(const Tensor& a, const std::function<double(double)>& fn) {
  Tensor out = a;
  for (auto& v : out.data()) v = fn(v);
  check_finite(out, "map");
  return out;
}

Tensor add_last_axis(const Tensor& a, const Tensor& bias) {
  if (a.rank() == 0 || bias.rank() != 1 || bias.size() != a.shape().back()) {
    throw ShapeError("add_last_axis: cannot broadcast " + shape_str(bias.shape()) + " over " +
                     shape_str(a.shape()));
  }
  Tensor out = a;
  const std::size_t c = bias.size();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); i += c) {
    for (std::size_t j = 0; j < c; ++j) o[i + j] += bias[j];
  }
  check_finite(out, "add_last_axis");
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* pc = c.raw();
  // i-k-j order: each c[i,j] still receives its terms in increasing k.
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  check_finite(c, "matmul");
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects rank 2, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

namespace {

// Views rank-3 [H,W,C] as a batch of one.
struct ImageDims {
  std::size_t batch, height, width, channels;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  throw ShapeError(std::string(op) + " expects [H,W,C] or [B,H,W,C], got " + shape_str(t.shape()));
}

Shape with_spatial(const Tensor& t, std::size_t h, std::size_t w) {
  Shape s = t.shape();
  s[s.size() - 3] = h;
  s[s.size() - 2] = w;
  return s;
}

}  // namespace

Tensor pad_zero(const Tensor& img, std::size_t k) {
  const auto d = image_dims(img, "pad_zero");
  if (k == 0) return img;
  const std::size_t ph = d.height + 2 * k, pw = d.width + 2 * k;
  Tensor out(with_spatial(img, ph, pw));
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < d.height; ++y) {
      const double* src = img.raw() + ((b * d.height + y) * d.width) * d.channels;
      double* dst = out.raw() + ((b * ph + y + k) * pw + k) * d.channels;
      std::copy(src, src + d.width * d.channels, dst);
    }
  return out;
}

Tensor crop(const Tensor& img, std::size_t k) {
  const auto d = image_dims(img, "crop");
  if (k == 0) return img;
  if (d.height <= 2 * k || d.width <= 2 * k) {
    throw ShapeError("crop by " + std::to_string(k) + " empties image " + shape_str(img.shape()));
  }
  const std::size_t ch = d.height - 2 * k, cw = d.width - 2 * k;
  Tensor out(with_spatial(img, ch, cw));
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < ch; ++y) {
      const double* src = img.raw() + ((b * d.height + y + k) * d.width + k) * d.channels;
      double* dst = out.raw() + ((b * ch + y) * cw) * d.channels;
      std::copy(src, src + cw * d.channels, dst);
    }
  return out;
}

Tensor reduce(ReduceOp op, const Tensor& t, std::span<const std::size_t> axes, bool keep_dims) {
  const std::size_t rank = t.rank();
  std::vector<bool> reduced(rank, axes.empty());
  for (auto a : axes) {
    if (a >= rank) {
      throw ShapeError("reduce: axis " + std::to_string(a) + " out of range for shape " +
                       shape_str(t.shape()));
    }
    reduced[a] = true;
  }

  Shape kept;  // output shape with reduced extents set to 1
  for (std::size_t a = 0; a < rank; ++a) kept.push_back(reduced[a] ? 1 : t.dim(a));
  const std::size_t out_n = shape_size(kept);
  const std::size_t group = t.size() / out_n;

  std::vector<double> acc(out_n, op == ReduceOp::max ? -std::numeric_limits<double>::infinity() : 0.0);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::size_t o = 0;
    for (std::size_t a = 0; a < rank; ++a) o = o * kept[a] + (reduced[a] ? 0 : idx[a]);
    const double v = t[i];
    if (op == ReduceOp::max)
      acc[o] = std::max(acc[o], v);
    else
      acc[o] += v;
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < t.dim(a)) break;
      idx[a] = 0;
    }
  }
  if (op == ReduceOp::mean)
    for (auto& v : acc) v /= static_cast<double>(group);

  Shape out_shape;
  if (keep_dims) {
    out_shape = kept;
  } else {
    for (std::size_t a = 0; a < rank; ++a)
      if (!reduced[a]) out_shape.push_back(t.dim(a));
    if (out_shape.empty()) out_shape.push_back(1);
  }
  return Tensor(std::move(out_shape), std::move(acc));
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

double max(const Tensor& t) {
  if (t.empty()) throw ShapeError("max of empty tensor");
  return *std::max_element(t.data().begin(), t.data().end());
}

double mean(const Tensor& t) {
  if (t.empty()) throw ShapeError("mean of empty tensor");
  return sum(t) / static_cast<double>(t.size());
}

namespace {

double interpolate_sorted(const std::vector<double>& sorted, double q) {
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile q must be in [0,100]");
  const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double percentile(std::span<const double> values, double q) {
  const double qs[] = {q};
  return percentiles(values, qs).front();
}

std::vector<double> percentiles(std::span<const double> values, std::span<const double> qs) {
  if (values.empty()) throw ShapeError("percentile of empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(interpolate_sorted(sorted, q));
  return out;
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t.data())) throw NumericError(what + ": non-finite value produced");
}

}  // namespace stormnet
