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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/rng.hpp"
#include "stormnet/tensor.hpp"

namespace stormnet {

inline constexpr std::size_t kImageSize = 48;
inline constexpr std::size_t kChannels = 4;
inline constexpr int kGeneratorVersion = 1;

/// Channel order of every image: radar-like VIL, infrared, water vapour, visible.
enum Channel : std::size_t { kVil = 0, kIr = 1, kWv = 2, kVis = 3 };
inline constexpr std::array<std::string_view, kChannels> kChannelNames = {"vil", "ir", "wv", "vis"};

/// Percentiles that make up the engineered feature vector, per channel.
inline constexpr std::array<double, 9> kFeaturePercentiles = {0, 1, 10, 25, 50, 75, 90, 99, 100};
inline constexpr std::size_t kNumFeatures = kChannels * kFeaturePercentiles.size();

/// Flashes only occur where VIL exceeds this value.
inline constexpr double kCoreThreshold = 0.5;

/// One 48x48 four-channel scene with its per-pixel flash counts.
struct StormSample {
  Tensor image;    // [48, 48, 4], every channel in [0, 1]
  Tensor flashes;  // [48, 48], non-negative integer counts

  double image_flash_count() const { return sum(flashes); }
  bool has_lightning() const { return image_flash_count() >= 1.0; }
};

enum class SplitId : std::uint64_t { train = 0, val = 1, test = 2, calibration = 3 };

std::string to_string(SplitId id);

/// Seed of one sample: the mixed dataset seed xor'ed with the split id (top
/// byte) and the sample index, so every sample can be regenerated on its own.
std::uint64_t sample_seed(std::uint64_t seed, SplitId split, std::size_t index);

/// Draws a scene with exactly \p n_cells storm cells from \p rng, then
/// Poisson flash counts with rate alpha * vil^2 above the core threshold.
StormSample synthesize_storm(Rng& rng, std::size_t n_cells, double alpha);

/// Regenerates sample \p index of \p split.
StormSample generate_sample(std::uint64_t seed, SplitId split, std::size_t index, double alpha);

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::size_t n_train = 2000;
  std::size_t n_val = 400;
  std::size_t n_test = 400;
  double pos_rate_target = 0.01;
  std::size_t calibration_samples = 512;
};

/// Bisection for the flash-rate scale alpha whose expected fraction of
/// lightning pixels over a dedicated calibration stream equals \p target.
/// Throws ConfigError when even alpha -> infinity cannot reach it.
double calibrate_flash_rate(std::uint64_t seed, double target, std::size_t n_samples);

/// Batched storage of one split.
struct Split {
  std::string name;
  Tensor images;   // [N, 48, 48, 4]
  Tensor flashes;  // [N, 48, 48]

  std::size_t size() const { return images.empty() ? 0 : images.dim(0); }
  StormSample sample(std::size_t i) const;
  double positive_pixel_fraction() const;
  /// Split holding samples \p indices, in that order.
  Split subset(std::span<const std::size_t> indices) const;
};

Split make_split(std::string name, std::span<const StormSample> samples);

struct GeneratorInfo {
  std::uint64_t seed = 0;
  int generator_version = kGeneratorVersion;
  double pos_rate_target = 0.01;
  double flash_rate_alpha = 0.0;
};

struct Dataset {
  GeneratorInfo info;
  Split train, val, test;

  const Split& split(std::string_view name) const;
};

/// Generates all three splits. Samples are independent of each other and of
/// the split sizes.
Dataset generate(const GeneratorConfig& config);

/// Block-mean resampling of an [H, W, C] image by an integer factor.
Tensor coarsen(const Tensor& img, std::size_t factor);

/// 36 engineered features: the nine percentiles of each channel, channel-major.
Tensor extract_percentiles(const Tensor& image);
Tensor extract_percentiles(const StormSample& sample);

struct Patch {
  Tensor image;    // [s, s, 4]
  Tensor flashes;  // [s, s]
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Non-overlapping size x size tiles that have at least \p min_pos_fraction
/// lightning pixels, each tagged with its origin.
std::vector<Patch> patch(const StormSample& sample, std::size_t size, double min_pos_fraction);
/// Reassembles tiles into a full scene; uncovered pixels stay zero.
StormSample stitch(std::span<const Patch> patches, std::size_t height, std::size_t width);

/// Quarter turns counter-clockwise and flips of [H, W] or [H, W, C] grids.
Tensor rotate90(const Tensor& grid, unsigned quarter_turns);
Tensor flip_up_down(const Tensor& grid);
Tensor flip_left_right(const Tensor& grid);

struct AugmentDraw {
  unsigned quarter_turns = 0;
  bool flip_ud = false;
  bool flip_lr = false;
  double noise_sigma = 0.0;
};

inline constexpr double kAugmentNoise = 0.01;

AugmentDraw draw_augmentation(Rng& rng, double noise_sigma = kAugmentNoise);
/// Geometric transform applied identically to image and flashes; Gaussian
/// noise on the image only, clipped back to [0, 1].
StormSample apply_augmentation(const StormSample& sample, const AugmentDraw& draw, Rng& rng);
StormSample augment(const StormSample& sample, Rng& rng);

// ---------------------------------------------------------------- on disk

/// Directory with manifest.json and {train,val,test}_{images,flashes}.bin.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Loads splits lazily, verifying checksums, and records which array files
/// were opened.
class DatasetReader {
 public:
  explicit DatasetReader(std::filesystem::path dir);

  const nlohmann::json& manifest() const noexcept { return manifest_; }
  GeneratorInfo info() const;
  std::size_t count(std::string_view split) const;
  Split load_split(std::string_view split);
  const std::vector<std::string>& accessed() const noexcept { return accessed_; }

 private:
  Tensor load_array(const std::string& name);

  std::filesystem::path dir_;
  nlohmann::json manifest_;
  std::vector<std::string> accessed_;
};

Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace stormnet
