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

#include <algorithm>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "stormnet/data.hpp"
#include "stormnet/errors.hpp"
#include "stormnet/task.hpp"

namespace stormnet {
namespace {

GeneratorConfig small_config(std::uint64_t seed, std::size_t n = 12) {
  GeneratorConfig c;
  c.seed = seed;
  c.n_train = n;
  c.n_val = 4;
  c.n_test = 4;
  c.calibration_samples = 64;
  return c;
}

TEST(Generator, SampleInvariants) {
  for (std::size_t i = 0; i < 20; ++i) {
    const StormSample s = generate_sample(11, SplitId::train, i, 5.0);
    ASSERT_EQ(s.image.shape(), (Shape{kImageSize, kImageSize, kChannels}));
    ASSERT_EQ(s.flashes.shape(), (Shape{kImageSize, kImageSize}));
    for (double v : s.image.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    for (std::size_t p = 0; p < s.flashes.size(); ++p) {
      const double f = s.flashes[p];
      ASSERT_EQ(f, std::floor(f));
      ASSERT_GE(f, 0.0);
      // Flashes only where the VIL channel exceeds the core threshold.
      if (f > 0) ASSERT_GT(s.image[p * kChannels + kVil], kCoreThreshold);
    }
  }
}

TEST(Generator, ZeroCellsMeansNoLightning) {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_FALSE(synthesize_storm(rng, 0, 100.0).has_lightning());
}

TEST(Generator, SampleRegenerationIsDeterministic) {
  const auto a = generate_sample(5, SplitId::val, 7, 3.0);
  const auto b = generate_sample(5, SplitId::val, 7, 3.0);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.flashes, b.flashes);
  EXPECT_NE(generate_sample(5, SplitId::test, 7, 3.0).image, a.image);
}

TEST(Generator, SampleSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0u, 1u, 7u})
    for (auto split : {SplitId::train, SplitId::val, SplitId::test, SplitId::calibration})
      for (std::size_t i = 0; i < 200; ++i) EXPECT_TRUE(seen.insert(sample_seed(seed, split, i)).second);
}

TEST(Generator, DifferentSeedsAreNotPermutations) {
  const auto a = generate(small_config(0)), b = generate(small_config(7));
  for (std::size_t i = 0; i < a.train.size(); ++i)
    for (std::size_t j = 0; j < b.train.size(); ++j)
      EXPECT_NE(a.train.sample(i).image, b.train.sample(j).image);
}

TEST(Generator, DatasetIsDeterministicAndPrefixStable) {
  const auto a = generate(small_config(2, 12));
  const auto b = generate(small_config(2, 12));
  EXPECT_EQ(a.train.images, b.train.images);
  EXPECT_EQ(a.test.flashes, b.test.flashes);
  EXPECT_EQ(a.info.flash_rate_alpha, b.info.flash_rate_alpha);
  const auto c = generate(small_config(2, 5));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(c.train.sample(i).image, a.train.sample(i).image);
}

TEST(Generator, CalibratedPositiveRate) {
  GeneratorConfig c = small_config(4, 300);
  c.calibration_samples = 512;
  const auto d = generate(c);
  EXPECT_GT(d.train.positive_pixel_fraction(), 0.005);
  EXPECT_LT(d.train.positive_pixel_fraction(), 0.02);
}

TEST(Generator, UnreachableTargetIsConfigError) {
  EXPECT_THROW(calibrate_flash_rate(0, 0.9, 32), ConfigError);
}

TEST(Coarsen, CheckerboardAveragesToHalf) {
  Tensor img({4, 4, 1});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) img.at({y, x, 0}) = (x + y) % 2;
  const Tensor c = coarsen(img, 2);
  ASSERT_EQ(c.shape(), (Shape{2, 2, 1}));
  for (double v : c.data()) EXPECT_EQ(v, 0.5);
  EXPECT_THROW(coarsen(img, 3), ShapeError);
}

TEST(Features, PercentilesAreMonotonePerChannel) {
  const auto s = generate_sample(1, SplitId::train, 3, 5.0);
  const Tensor f = extract_percentiles(s);
  ASSERT_EQ(f.shape(), (Shape{kNumFeatures}));
  const std::size_t q = kFeaturePercentiles.size();
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t i = 1; i < q; ++i) EXPECT_LE(f[c * q + i - 1], f[c * q + i]);
    double lo = 1.0, hi = 0.0;
    for (std::size_t p = 0; p < kImageSize * kImageSize; ++p) {
      lo = std::min(lo, s.image[p * kChannels + c]);
      hi = std::max(hi, s.image[p * kChannels + c]);
    }
    EXPECT_EQ(f[c * q], lo);
    EXPECT_EQ(f[c * q + q - 1], hi);
  }
}

TEST(Patches, PatchThenStitchRestoresTheScene) {
  const auto s = generate_sample(1, SplitId::train, 4, 5.0);
  const auto tiles = patch(s, 16, 0.0);
  EXPECT_EQ(tiles.size(), 9u);
  const auto back = stitch(tiles, kImageSize, kImageSize);
  EXPECT_EQ(back.image, s.image);
  EXPECT_EQ(back.flashes, s.flashes);
}

TEST(Patches, MinimumFractionFilters) {
  StormSample s{Tensor({4, 4, kChannels}), Tensor({4, 4})};
  s.flashes.at({0, 0}) = 3;
  const auto tiles = patch(s, 2, 0.25);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].row, 0u);
  EXPECT_EQ(tiles[0].col, 0u);
}

TEST(Augment, RotationByHand) {
  const Tensor g = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(rotate90(g, 1), Tensor::matrix({{2, 4}, {1, 3}}));
  EXPECT_EQ(rotate90(g, 4), g);
  EXPECT_EQ(flip_up_down(g), Tensor::matrix({{3, 4}, {1, 2}}));
  EXPECT_EQ(flip_left_right(g), Tensor::matrix({{2, 1}, {4, 3}}));
}

TEST(Augment, GeometryIsSharedAndCountsPreserved) {
  Rng rng(8);
  const auto s = generate_sample(1, SplitId::train, 5, 20.0);
  for (int i = 0; i < 20; ++i) {
    AugmentDraw d = draw_augmentation(rng, 0.0);
    const auto a = apply_augmentation(s, d, rng);
    EXPECT_EQ(a.image_flash_count(), s.image_flash_count());
    // Without noise the image and flashes move together: lightning stays
    // under VIL cores.
    for (std::size_t p = 0; p < a.flashes.size(); ++p)
      if (a.flashes[p] > 0) ASSERT_GT(a.image[p * kChannels + kVil], kCoreThreshold);
    auto sorted = [](std::span<const double> v) {
      std::vector<double> out(v.begin(), v.end());
      std::sort(out.begin(), out.end());
      return out;
    };
    EXPECT_EQ(sorted(a.image.data()), sorted(s.image.data()));
  }
  const auto noisy = augment(s, rng);
  for (double v : noisy.image.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Storage, DatasetRoundTrip) {
  const auto d = generate(small_config(9));
  const auto dir = oracle::temp_dir("dataset");
  write_dataset(d, dir);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.info.seed, d.info.seed);
  EXPECT_EQ(back.info.flash_rate_alpha, d.info.flash_rate_alpha);
  EXPECT_EQ(back.train.images, d.train.images);
  EXPECT_EQ(back.val.flashes, d.val.flashes);
  EXPECT_EQ(back.test.images, d.test.images);
}

TEST(Storage, ReaderOnlyTouchesRequestedSplit) {
  const auto d = generate(small_config(9));
  const auto dir = oracle::temp_dir("reader");
  write_dataset(d, dir);
  DatasetReader r(dir);
  EXPECT_EQ(r.count("train"), 12u);
  r.load_split("test");
  for (const auto& f : r.accessed()) EXPECT_EQ(f.rfind("test_", 0), 0u) << f;
}

TEST(Storage, CorruptionIsDetected) {
  const auto d = generate(small_config(9));
  const auto dir = oracle::temp_dir("corrupt");
  write_dataset(d, dir);
  {
    std::fstream f(dir / "train_images.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x7f');
  }
  DatasetReader r(dir);
  EXPECT_THROW(r.load_split("train"), ChecksumError);
  EXPECT_NO_THROW(r.load_split("val"));
  EXPECT_THROW(DatasetReader(dir / "missing"), IoError);
}

TEST(TaskData, TargetsPerTask) {
  const auto d = generate(small_config(6, 40));
  const auto cls = make_task_data(d.train, Task::cls, InputKind::image);
  EXPECT_EQ(cls.size(), 40u);
  EXPECT_EQ(cls.targets.shape(), (Shape{40, 1}));
  const auto reg = make_task_data(d.train, Task::reg, InputKind::engineered);
  EXPECT_EQ(reg.inputs.shape(), (Shape{reg.size(), kNumFeatures}));
  for (std::size_t i = 0; i < reg.size(); ++i) {
    EXPECT_GE(reg.targets[i], 1.0);
    EXPECT_EQ(reg.targets[i], d.train.sample(reg.source_index[i]).image_flash_count());
  }
  const auto seg = make_task_data(d.train, Task::seg_cls, InputKind::image);
  EXPECT_EQ(seg.targets.shape(), (Shape{40, kImageSize, kImageSize, 1}));
  for (double v : seg.targets.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

}  // namespace
}  // namespace stormnet
