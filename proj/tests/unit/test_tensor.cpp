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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {
namespace {

TEST(Tensor, ConstructionAndShape) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4u);
  EXPECT_DOUBLE_EQ(sum(t), 36.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
}

TEST(Tensor, MultiIndexIsRowMajor) {
  Tensor t({2, 3});
  t.at({1, 2}) = 7.0;
  EXPECT_EQ(t[5], 7.0);
  EXPECT_THROW(t.at({2, 0}), ShapeError);
}

TEST(Tensor, ElementwiseRequiresEqualShapes) {
  const Tensor a({2, 3}, 1.0), b({3, 2}, 1.0);
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
  EXPECT_EQ(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({3, 8}));
  EXPECT_EQ(sub(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({-2, -2}));
}

TEST(Tensor, AddLastAxisBroadcast) {
  const Tensor a({2, 2}, 1.0);
  EXPECT_EQ(add_last_axis(a, Tensor::vector({1, 2})), Tensor::matrix({{2, 3}, {2, 3}}));
  EXPECT_THROW(add_last_axis(a, Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(Tensor, MatmulIdentity) {
  Rng rng(1);
  const Tensor a = oracle::random_tensor(rng, {4, 4});
  EXPECT_EQ(matmul(a, Tensor::identity(4)), a);
  EXPECT_THROW(matmul(a, Tensor({3, 2})), ShapeError);
}

TEST(Tensor, MatmulMatchesTripleLoopBitwise) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(9), k = 1 + rng.below(9), m = 1 + rng.below(9);
    const Tensor a = oracle::random_tensor(rng, {n, k}), b = oracle::random_tensor(rng, {k, m});
    EXPECT_EQ(matmul(a, b), oracle::naive_matmul(a, b));
  }
}

TEST(Tensor, Transpose) {
  const Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(transpose(a), Tensor::matrix({{1, 4}, {2, 5}, {3, 6}}));
  EXPECT_EQ(transpose(transpose(a)), a);
}

TEST(Tensor, ReduceAxes) {
  const Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const std::size_t ax0[] = {0}, ax1[] = {1};
  EXPECT_EQ(reduce(ReduceOp::sum, a, ax0), Tensor::vector({5, 7, 9}));
  EXPECT_EQ(reduce(ReduceOp::max, a, ax1), Tensor::vector({3, 6}));
  EXPECT_EQ(reduce(ReduceOp::mean, a, ax1, true).shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(mean(a), 3.5);
  EXPECT_DOUBLE_EQ(max(a), 6.0);
}

TEST(Tensor, PadCropRoundTrip) {
  Rng rng(3);
  const Tensor img = oracle::random_tensor(rng, {5, 4, 2});
  const Tensor padded = pad_zero(img, 2);
  EXPECT_EQ(padded.shape(), (Shape{9, 8, 2}));
  EXPECT_EQ(padded.at({0, 0, 1}), 0.0);
  EXPECT_EQ(padded.at({2, 2, 0}), img.at({0, 0, 0}));
  EXPECT_EQ(crop(padded, 2), img);
}

TEST(Tensor, PercentileLinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(percentile(v, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 100), 4.0);
  // rank = 0.5 * 3 = 1.5 between 2 and 3
  EXPECT_DOUBLE_EQ(percentile(v, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile(v, 25), 1.75);
  const std::vector<double> qs{0, 50, 100};
  EXPECT_EQ(percentiles(v, qs), (std::vector<double>{1, 2.5, 4}));
}

TEST(Tensor, FiniteChecks) {
  Tensor t({3}, 0.0);
  EXPECT_NO_THROW(check_finite(t, "t"));
  t[1] = std::nan("");
  EXPECT_THROW(check_finite(t, "t"), NumericError);
  EXPECT_FALSE(all_finite(t.data()));
}

TEST(Tensor, Reshape) {
  const Tensor a({2, 6}, 1.0);
  EXPECT_EQ(a.reshaped({3, 4}).shape(), (Shape{3, 4}));
  EXPECT_THROW(a.reshaped({5, 2}), ShapeError);
}

}  // namespace
}  // namespace stormnet
