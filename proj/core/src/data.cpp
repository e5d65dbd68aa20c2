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

#include "stormnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stormnet/container.hpp"
#include "stormnet/errors.hpp"

namespace stormnet {

std::string to_string(SplitId id) {
  switch (id) {
    case SplitId::train: return "train";
    case SplitId::val: return "val";
    case SplitId::test: return "test";
    case SplitId::calibration: return "calibration";
  }
  return "?";
}

std::uint64_t sample_seed(std::uint64_t seed, SplitId split, std::size_t index) {
  return splitmix64(seed) ^ (static_cast<std::uint64_t>(split) << 56) ^ static_cast<std::uint64_t>(index);
}

namespace {

constexpr std::size_t N = kImageSize;
constexpr std::size_t kVisOversample = 2;

struct Blob {
  double cx, cy, sx, sy, cos_t, sin_t, amp;

  double at(double x, double y, double widen = 1.0) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / (sx * widen);
    const double v = (-dx * sin_t + dy * cos_t) / (sy * widen);
    return amp * std::exp(-0.5 * (u * u + v * v));
  }
};

Blob draw_blob(Rng& rng, double lo, double hi, double smin, double smax, double amin, double amax) {
  Blob b;
  b.cx = rng.uniform(lo, hi);
  b.cy = rng.uniform(lo, hi);
  b.sx = rng.uniform(smin, smax);
  b.sy = rng.uniform(smin, smax);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  b.cos_t = std::cos(theta);
  b.sin_t = std::sin(theta);
  b.amp = rng.uniform(amin, amax);
  return b;
}

using Field = std::vector<double>;  // row-major n x n

// Separable Gaussian blur with clamped edges.
Field blur(const Field& f, std::size_t n, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  const int ni = static_cast<int>(n);
  auto clampi = [&](int i) { return static_cast<std::size_t>(std::clamp(i, 0, ni - 1)); };
  Field tmp(n * n), out(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (int x = 0; x < ni; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * f[y * n + clampi(x + i)];
      tmp[y * n + static_cast<std::size_t>(x)] = s;
    }
  for (int y = 0; y < ni; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp[clampi(y + i) * n + x];
      out[static_cast<std::size_t>(y) * n + x] = s;
    }
  return out;
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// The four image channels of one scene; flashes are drawn afterwards.
Tensor synthesize_image(Rng& rng, std::size_t n_cells) {
  std::vector<Blob> storms, cirrus;
  for (std::size_t i = 0; i < n_cells; ++i) storms.push_back(draw_blob(rng, 4.0, 44.0, 2.0, 6.0, 0.1, 0.9));
  const std::size_t n_cirrus = static_cast<std::size_t>(rng.below(3));
  for (std::size_t i = 0; i < n_cirrus; ++i) cirrus.push_back(draw_blob(rng, 0.0, 48.0, 4.0, 10.0, 0.2, 0.6));

  Field vil(N * N), cold(N * N);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x) {
      double v = 0.0;
      for (const auto& s : storms) v += s.at(static_cast<double>(x), static_cast<double>(y));
      vil[y * N + x] = clip01(v);
    }
  // Cold cloud tops: smoothed storm cores plus cirrus that has no VIL.
  cold = blur(vil, N, 1.5);
  for (std::size_t y = 0; y < N; ++y)
    for (std::size_t x = 0; x < N; ++x) {
      double c = cold[y * N + x];
      for (const auto& b : cirrus) c += b.at(static_cast<double>(x), static_cast<double>(y));
      cold[y * N + x] = clip01(c);
    }
  const Field cold_wide = blur(cold, N, 3.0);

  // Visible reflectance is synthesized at twice the resolution and reduced.
  const std::size_t hi = N * kVisOversample;
  Tensor vis_hi({hi, hi, 1});
  for (std::size_t y = 0; y < hi; ++y)
    for (std::size_t x = 0; x < hi; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / kVisOversample - 0.5;
      const double py = (static_cast<double>(y) + 0.5) / kVisOversample - 0.5;
      double c = 0.0;
      for (const auto& s : storms) c += s.at(px, py, 1.6);
      for (const auto& b : cirrus) c += 0.7 * b.at(px, py);
      vis_hi[y * hi + x] = clip01(0.1 + 0.8 * clip01(c) + rng.normal(0.0, 0.06));
    }
  const Tensor vis = coarsen(vis_hi, kVisOversample);

  Tensor image({N, N, kChannels});
  for (std::size_t p = 0; p < N * N; ++p) {
    image[p * kChannels + kVil] = vil[p];
    image[p * kChannels + kIr] = clip01(0.9 - 0.8 * cold[p] + rng.normal(0.0, 0.03));
    image[p * kChannels + kWv] = clip01(0.8 - 0.6 * cold_wide[p] + rng.normal(0.0, 0.03));
    image[p * kChannels + kVis] = vis[p];
  }
  return image;
}

double flash_rate(double vil, double alpha) { return vil > kCoreThreshold ? alpha * vil * vil : 0.0; }

std::size_t draw_cell_count(Rng& rng) { return static_cast<std::size_t>(rng.below(5)); }

}  // namespace

StormSample synthesize_storm(Rng& rng, std::size_t n_cells, double alpha) {
  StormSample s;
  s.image = synthesize_image(rng, n_cells);
  s.flashes = Tensor({N, N});
  for (std::size_t p = 0; p < N * N; ++p) {
    s.flashes[p] = static_cast<double>(rng.poisson(flash_rate(s.image[p * kChannels + kVil], alpha)));
  }
  return s;
}

StormSample generate_sample(std::uint64_t seed, SplitId split, std::size_t index, double alpha) {
  Rng rng(sample_seed(seed, split, index));
  const std::size_t cells = draw_cell_count(rng);
  return synthesize_storm(rng, cells, alpha);
}

double calibrate_flash_rate(std::uint64_t seed, double target, std::size_t n_samples) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("pixel-positive rate target must be in (0,1)");
  if (n_samples == 0) throw ConfigError("calibration needs at least one sample");
  std::vector<double> core_sq;  // vil^2 of every core pixel
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(sample_seed(seed, SplitId::calibration, i));
    const std::size_t cells = draw_cell_count(rng);
    const Tensor image = synthesize_image(rng, cells);
    for (std::size_t p = 0; p < N * N; ++p) {
      const double v = image[p * kChannels + kVil];
      if (v > kCoreThreshold) core_sq.push_back(v * v);
    }
  }
  const double total = static_cast<double>(n_samples * N * N);
  auto expected_rate = [&](double alpha) {
    double s = 0.0;
    for (double v2 : core_sq) s += -std::expm1(-alpha * v2);
    return s / total;
  };
  const double ceiling = static_cast<double>(core_sq.size()) / total;
  if (target >= ceiling) {
    throw ConfigError("pixel-positive rate target " + std::to_string(target) +
                      " is unreachable: at most " + std::to_string(ceiling) + " of pixels exceed the core threshold");
  }
  double lo = 0.0, hi = 1.0;
  while (expected_rate(hi) < target) {
    hi *= 2.0;
    if (hi > 1e12) {
      throw ConfigError("flash-rate calibration failed; achieved rate " + std::to_string(expected_rate(hi)));
    }
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_rate(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- splits

StormSample Split::sample(std::size_t i) const {
  if (i >= size()) throw ShapeError("sample index out of range");
  const std::size_t ip = N * N * kChannels, fp = N * N;
  StormSample s;
  s.image = Tensor({N, N, kChannels}, std::vector<double>(images.data().begin() + static_cast<std::ptrdiff_t>(i * ip),
                                                          images.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * ip)));
  s.flashes = Tensor({N, N}, std::vector<double>(flashes.data().begin() + static_cast<std::ptrdiff_t>(i * fp),
                                                 flashes.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * fp)));
  return s;
}

double Split::positive_pixel_fraction() const {
  if (flashes.empty()) return 0.0;
  std::size_t pos = 0;
  for (double v : flashes.data()) pos += v >= 1.0;
  return static_cast<double>(pos) / static_cast<double>(flashes.size());
}

Split Split::subset(std::span<const std::size_t> indices) const {
  std::vector<StormSample> samples;
  samples.reserve(indices.size());
  for (auto i : indices) samples.push_back(sample(i));
  return make_split(name, samples);
}

Split make_split(std::string name, std::span<const StormSample> samples) {
  Split s;
  s.name = std::move(name);
  if (samples.empty()) return s;
  const Shape& is = samples.front().image.shape();
  const Shape& fs = samples.front().flashes.shape();
  std::vector<double> img, fl;
  img.reserve(samples.size() * shape_size(is));
  fl.reserve(samples.size() * shape_size(fs));
  for (const auto& x : samples) {
    if (x.image.shape() != is || x.flashes.shape() != fs) throw ShapeError("samples in a split must share a shape");
    img.insert(img.end(), x.image.data().begin(), x.image.data().end());
    fl.insert(fl.end(), x.flashes.data().begin(), x.flashes.data().end());
  }
  Shape bis = is, bfs = fs;
  bis.insert(bis.begin(), samples.size());
  bfs.insert(bfs.begin(), samples.size());
  s.images = Tensor(bis, std::move(img));
  s.flashes = Tensor(bfs, std::move(fl));
  return s;
}

const Split& Dataset::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

Dataset generate(const GeneratorConfig& config) {
  if (config.n_train == 0 || config.n_val == 0 || config.n_test == 0) {
    throw ConfigError("every split needs at least one sample");
  }
  Dataset d;
  d.info.seed = config.seed;
  d.info.pos_rate_target = config.pos_rate_target;
  d.info.flash_rate_alpha = calibrate_flash_rate(config.seed, config.pos_rate_target, config.calibration_samples);
  auto make = [&](SplitId id, std::size_t n) {
    std::vector<StormSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) samples.push_back(generate_sample(config.seed, id, i, d.info.flash_rate_alpha));
    return make_split(to_string(id), samples);
  };
  d.train = make(SplitId::train, config.n_train);
  d.val = make(SplitId::val, config.n_val);
  d.test = make(SplitId::test, config.n_test);
  return d;
}

// ---------------------------------------------------------------- transforms

Tensor coarsen(const Tensor& img, std::size_t factor) {
  if (img.rank() != 3) throw ShapeError("coarsen expects [H,W,C], got " + shape_str(img.shape()));
  if (factor == 0) throw ConfigError("coarsen factor must be positive");
  const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h % factor || w % factor) {
    throw ShapeError("coarsen: " + shape_str(img.shape()) + " is not divisible by " + std::to_string(factor));
  }
  if (factor == 1) return img;
  const std::size_t oh = h / factor, ow = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  Tensor out({oh, ow, c});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy)
          for (std::size_t dx = 0; dx < factor; ++dx) s += img[((y * factor + dy) * w + x * factor + dx) * c + ch];
        out[(y * ow + x) * c + ch] = s * inv;
      }
  return out;
}

Tensor extract_percentiles(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != kChannels) {
    throw ShapeError("percentile features expect [H,W,4], got " + shape_str(image.shape()));
  }
  const std::size_t pixels = image.dim(0) * image.dim(1);
  Tensor out({kNumFeatures});
  std::vector<double> channel(pixels);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t p = 0; p < pixels; ++p) channel[p] = image[p * kChannels + c];
    const auto q = percentiles(channel, kFeaturePercentiles);
    std::copy(q.begin(), q.end(), out.data().begin() + static_cast<std::ptrdiff_t>(c * kFeaturePercentiles.size()));
  }
  return out;
}

Tensor extract_percentiles(const StormSample& sample) { return extract_percentiles(sample.image); }

std::vector<Patch> patch(const StormSample& sample, std::size_t size, double min_pos_fraction) {
  const std::size_t h = sample.image.dim(0), w = sample.image.dim(1), c = sample.image.dim(2);
  if (size == 0 || h % size || w % size) {
    throw ConfigError("patch size " + std::to_string(size) + " must divide " + shape_str(sample.image.shape()));
  }
  if (!(min_pos_fraction >= 0.0 && min_pos_fraction <= 1.0)) throw ConfigError("min_pos_fraction must be in [0,1]");
  std::vector<Patch> out;
  for (std::size_t r = 0; r < h; r += size)
    for (std::size_t col = 0; col < w; col += size) {
      Patch p{Tensor({size, size, c}), Tensor({size, size}), r, col};
      std::size_t positives = 0;
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const std::size_t src = (r + y) * w + col + x;
          for (std::size_t ch = 0; ch < c; ++ch) p.image[(y * size + x) * c + ch] = sample.image[src * c + ch];
          p.flashes[y * size + x] = sample.flashes[src];
          positives += sample.flashes[src] >= 1.0;
        }
      const double frac = static_cast<double>(positives) / static_cast<double>(size * size);
      if (frac >= min_pos_fraction) out.push_back(std::move(p));
    }
  return out;
}

StormSample stitch(std::span<const Patch> patches, std::size_t height, std::size_t width) {
  if (patches.empty()) throw ConfigError("stitch needs at least one patch");
  const std::size_t c = patches.front().image.dim(2);
  StormSample s{Tensor({height, width, c}), Tensor({height, width})};
  for (const auto& p : patches) {
    const std::size_t ph = p.image.dim(0), pw = p.image.dim(1);
    if (p.row + ph > height || p.col + pw > width) throw ShapeError("patch lies outside the stitched extent");
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x) {
        const std::size_t dst = (p.row + y) * width + p.col + x;
        for (std::size_t ch = 0; ch < c; ++ch) s.image[dst * c + ch] = p.image[(y * pw + x) * c + ch];
        s.flashes[dst] = p.flashes[y * pw + x];
      }
  }
  return s;
}

namespace {

// Calls fn(dst_index, src_index) for a spatial remap of an [H, W, ...] grid.
template <typename Fn>
Tensor remap(const Tensor& grid, std::size_t out_h, std::size_t out_w, Fn src_of) {
  if (grid.rank() < 2) throw ShapeError("spatial transform expects [H,W] or [H,W,C]");
  const std::size_t c = grid.rank() == 3 ? grid.dim(2) : 1;
  Shape shape = grid.shape();
  shape[0] = out_h;
  shape[1] = out_w;
  Tensor out(shape);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t src = src_of(y, x);
      for (std::size_t ch = 0; ch < c; ++ch) out[(y * out_w + x) * c + ch] = grid[src * c + ch];
    }
  return out;
}

}  // namespace

Tensor rotate90(const Tensor& grid, unsigned quarter_turns) {
  Tensor out = grid;
  for (unsigned t = 0; t < quarter_turns % 4; ++t) {
    const std::size_t h = out.dim(0), w = out.dim(1);
    // Counter-clockwise: new[y][x] = old[x][w - 1 - y], new extent [w, h].
    out = remap(out, w, h, [&](std::size_t y, std::size_t x) { return x * w + (w - 1 - y); });
  }
  return out;
}

Tensor flip_up_down(const Tensor& grid) {
  const std::size_t h = grid.dim(0), w = grid.dim(1);
  return remap(grid, h, w, [&](std::size_t y, std::size_t x) { return (h - 1 - y) * w + x; });
}

Tensor flip_left_right(const Tensor& grid) {
  const std::size_t h = grid.dim(0), w = grid.dim(1);
  return remap(grid, h, w, [&](std::size_t y, std::size_t x) { return y * w + (w - 1 - x); });
}

AugmentDraw draw_augmentation(Rng& rng, double noise_sigma) {
  AugmentDraw d;
  d.quarter_turns = static_cast<unsigned>(rng.below(4));
  d.flip_ud = rng.bernoulli(0.5);
  d.flip_lr = rng.bernoulli(0.5);
  d.noise_sigma = noise_sigma;
  return d;
}

StormSample apply_augmentation(const StormSample& sample, const AugmentDraw& draw, Rng& rng) {
  auto geo = [&](const Tensor& t) {
    Tensor out = rotate90(t, draw.quarter_turns);
    if (draw.flip_ud) out = flip_up_down(out);
    if (draw.flip_lr) out = flip_left_right(out);
    return out;
  };
  StormSample out{geo(sample.image), geo(sample.flashes)};
  if (draw.noise_sigma > 0.0)
    for (auto& v : out.image.data()) v = clip01(v + rng.normal(0.0, draw.noise_sigma));
  return out;
}

StormSample augment(const StormSample& sample, Rng& rng) {
  const AugmentDraw d = draw_augmentation(rng);
  return apply_augmentation(sample, d, rng);
}

// ---------------------------------------------------------------- on disk

namespace {

constexpr const char* kSplits[] = {"train", "val", "test"};

ArrayDescriptor write_array(const std::filesystem::path& dir, const std::string& name, const Tensor& t, DType dtype) {
  const auto bytes = encode_array(t, dtype);
  ArrayDescriptor d;
  d.name = name;
  d.file = name + ".bin";
  d.dtype = dtype;
  d.shape = t.shape();
  d.byte_offset = 0;
  d.byte_length = bytes.size();
  d.crc32 = crc32(bytes);
  write_file_atomic(dir / d.file, bytes);
  return d;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json m;
  m["format"] = "stormnet-dataset";
  m["schema_version"] = kContainerSchemaVersion;
  m["generator_version"] = dataset.info.generator_version;
  m["seed"] = dataset.info.seed;
  m["pos_rate_target"] = dataset.info.pos_rate_target;
  m["flash_rate_alpha"] = dataset.info.flash_rate_alpha;
  m["core_threshold"] = kCoreThreshold;
  m["image_size"] = kImageSize;
  m["channels"] = std::vector<std::string>(kChannelNames.begin(), kChannelNames.end());
  m["arrays"] = nlohmann::json::array();
  for (const char* name : kSplits) {
    const Split& s = dataset.split(name);
    m["counts"][name] = s.size();
    m["positive_pixel_fraction"][name] = s.positive_pixel_fraction();
    m["arrays"].push_back(to_json(write_array(dir, std::string(name) + "_images", s.images, DType::f64)));
    m["arrays"].push_back(to_json(write_array(dir, std::string(name) + "_flashes", s.flashes, DType::u16)));
  }
  write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

DatasetReader::DatasetReader(std::filesystem::path dir) : dir_(std::move(dir)) {
  const auto bytes = read_file(dir_ / "manifest.json");
  try {
    manifest_ = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest is not valid JSON: ") + e.what());
  }
  if (manifest_.value("format", "") != "stormnet-dataset") throw FormatError("not a stormnet dataset manifest");
  if (manifest_.value("schema_version", 0) != kContainerSchemaVersion) {
    throw FormatError("unsupported dataset schema version");
  }
}

GeneratorInfo DatasetReader::info() const {
  GeneratorInfo i;
  i.seed = manifest_.value("seed", std::uint64_t{0});
  i.generator_version = manifest_.value("generator_version", 0);
  i.pos_rate_target = manifest_.value("pos_rate_target", 0.0);
  i.flash_rate_alpha = manifest_.value("flash_rate_alpha", 0.0);
  return i;
}

std::size_t DatasetReader::count(std::string_view split) const {
  const auto& counts = manifest_.at("counts");
  const std::string key(split);
  if (!counts.contains(key)) throw ConfigError("dataset has no split '" + key + "'");
  return counts.at(key).get<std::size_t>();
}

Tensor DatasetReader::load_array(const std::string& name) {
  for (const auto& jd : manifest_.at("arrays")) {
    if (jd.value("name", "") != name) continue;
    const auto d = descriptor_from_json(jd);
    accessed_.push_back(d.file);
    const auto bytes = read_file(dir_ / d.file);
    if (bytes.size() < d.byte_offset + d.byte_length) throw ChecksumError("array file " + d.file + " is truncated");
    std::span<const std::uint8_t> slice(bytes.data() + d.byte_offset, static_cast<std::size_t>(d.byte_length));
    if (crc32(slice) != d.crc32) throw ChecksumError("checksum mismatch for " + d.file);
    return decode_array(slice, d.dtype, d.shape);
  }
  throw FormatError("dataset manifest has no array '" + name + "'");
}

Split DatasetReader::load_split(std::string_view split) {
  const std::string name(split);
  Split s;
  s.name = name;
  s.images = load_array(name + "_images");
  s.flashes = load_array(name + "_flashes");
  if (s.images.dim(0) != s.flashes.dim(0)) throw FormatError("split '" + name + "' has mismatched array counts");
  return s;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  DatasetReader r(dir);
  Dataset d;
  d.info = r.info();
  d.train = r.load_split("train");
  d.val = r.load_split("val");
  d.test = r.load_split("test");
  return d;
}

}  // namespace stormnet
