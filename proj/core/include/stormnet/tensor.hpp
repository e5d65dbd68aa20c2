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
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stormnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of 64-bit reals.
///
/// Images use the channel-last convention [H, W, C]; batches prepend B.
/// The element count always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Rank-1 tensor from a literal list.
  static Tensor vector(std::initializer_list<double> values);
  /// Rank-2 tensor from nested literal rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Bounds-checked multi-index access.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(double value);

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// Elementwise arithmetic. Two-tensor forms require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor map(const Tensor& a, const std::function<double(double)>& fn);

/// Adds a vector along the last axis (the one permitted broadcast).
Tensor add_last_axis(const Tensor& a, const Tensor& bias);

/// c[i,j] = sum_k a[i,k] b[k,j], accumulated in increasing k.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Zero ring of width k around an [H, W, C] image (or [B, H, W, C] batch).
Tensor pad_zero(const Tensor& img, std::size_t k);
/// Removes a ring of width k; inverse of pad_zero.
Tensor crop(const Tensor& img, std::size_t k);

enum class ReduceOp { sum, max, mean };

/// Reduces over the given axes (all axes when empty). Reduced axes are
/// dropped unless keep_dims is set. Accumulation order is row-major.
Tensor reduce(ReduceOp op, const Tensor& t, std::span<const std::size_t> axes = {},
              bool keep_dims = false);
double sum(const Tensor& t);
double max(const Tensor& t);
double mean(const Tensor& t);

/// Linear-interpolation percentile: rank = q/100 * (n - 1) into sorted data.
double percentile(std::span<const double> values, double q);
/// Several percentiles from one sort.
std::vector<double> percentiles(std::span<const double> values, std::span<const double> qs);

/// Throws NumericError naming \p what if any element is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);
bool all_finite(std::span<const double> values);

}  // namespace stormnet
