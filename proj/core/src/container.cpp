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

#include "stormnet/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "stormnet/errors.hpp"

namespace stormnet {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'R', 'M', 'N', 'E', 'T', '\0'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  return v;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    const auto v = get_le(bytes_, pos_, n);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ChecksumError(std::string("container truncated while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(DType dtype) { return dtype == DType::f64 ? "f64le" : "u16le"; }

DType dtype_from_string(std::string_view name) {
  if (name == "f64le") return DType::f64;
  if (name == "u16le") return DType::u16;
  throw FormatError("unknown element type '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dtype) { return dtype == DType::f64 ? 8 : 2; }

nlohmann::json to_json(const ArrayDescriptor& d) {
  nlohmann::json j;
  j["name"] = d.name;
  if (!d.file.empty()) j["file"] = d.file;
  j["dtype"] = to_string(d.dtype);
  j["shape"] = d.shape;
  j["byte_offset"] = d.byte_offset;
  j["byte_length"] = d.byte_length;
  j["crc32"] = d.crc32;
  return j;
}

ArrayDescriptor descriptor_from_json(const nlohmann::json& j) {
  try {
    ArrayDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.file = j.value("file", std::string{});
    d.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    d.shape = j.at("shape").get<Shape>();
    d.byte_offset = j.at("byte_offset").get<std::uint64_t>();
    d.byte_length = j.at("byte_length").get<std::uint64_t>();
    d.crc32 = j.at("crc32").get<std::uint32_t>();
    if (d.byte_length != shape_size(d.shape) * dtype_size(d.dtype)) {
      throw FormatError("array '" + d.name + "' byte length does not match its shape");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad array descriptor: ") + e.what());
  }
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(chunk));
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_array(const Tensor& t, DType dtype) {
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * dtype_size(dtype));
  for (double v : t.data()) {
    if (dtype == DType::f64) {
      put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    } else {
      if (!(v >= 0.0 && v <= 65535.0) || std::floor(v) != v) {
        throw FormatError("value " + std::to_string(v) + " is not representable as u16");
      }
      put_le(out, static_cast<std::uint64_t>(v), 2);
    }
  }
  return out;
}

Tensor decode_array(std::span<const std::uint8_t> bytes, DType dtype, const Shape& shape) {
  const std::size_t n = shape_size(shape);
  const std::size_t width = dtype_size(dtype);
  if (bytes.size() != n * width) throw FormatError("array payload size does not match shape " + shape_str(shape));
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dtype == DType::f64)
      data[i] = std::bit_cast<double>(get_le(bytes, i * 8, 8));
    else
      data[i] = static_cast<double>(get_le(bytes, i * 2, 2));
  }
  return Tensor(shape, std::move(data));
}

std::vector<std::uint8_t> encode_bundle(const Bundle& bundle) {
  nlohmann::json manifest;
  manifest["format"] = "stormnet-bundle";
  manifest["schema_version"] = kContainerSchemaVersion;
  manifest["meta"] = bundle.meta;
  manifest["arrays"] = nlohmann::json::array();

  std::vector<std::uint8_t> payload;
  for (const auto& a : bundle.arrays) {
    auto bytes = encode_array(a.value, a.dtype);
    ArrayDescriptor d;
    d.name = a.name;
    d.dtype = a.dtype;
    d.shape = a.value.shape();
    d.byte_offset = payload.size();
    d.byte_length = bytes.size();
    d.crc32 = crc32(bytes);
    manifest["arrays"].push_back(to_json(d));
    payload.insert(payload.end(), bytes.begin(), bytes.end());
  }
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, kContainerSchemaVersion, 4);
  put_le(out, bundle.section.size(), 4);
  out.insert(out.end(), bundle.section.begin(), bundle.section.end());
  put_le(out, text.size(), 8);
  const auto* tb = reinterpret_cast<const std::uint8_t*>(text.data());
  put_le(out, crc32({tb, text.size()}), 4);
  out.insert(out.end(), tb, tb + text.size());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bundle decode_bundle(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("not a stormnet container");
  const auto version = r.u(4, "version");
  if (version != kContainerSchemaVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  Bundle bundle;
  const auto name_len = r.u(4, "section name length");
  auto name = r.take(static_cast<std::size_t>(name_len), "section name");
  bundle.section.assign(name.begin(), name.end());
  const auto manifest_len = r.u(8, "manifest length");
  const auto manifest_crc = static_cast<std::uint32_t>(r.u(4, "manifest checksum"));
  auto text = r.take(static_cast<std::size_t>(manifest_len), "manifest");
  if (crc32(text) != manifest_crc) throw ChecksumError("manifest checksum mismatch");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("schema_version", 0) != kContainerSchemaVersion) {
    throw FormatError("unsupported manifest schema version");
  }
  bundle.meta = manifest.value("meta", nlohmann::json::object());
  const auto payload = r.rest();
  for (const auto& jd : manifest.at("arrays")) {
    const auto d = descriptor_from_json(jd);
    if (d.byte_offset > payload.size() || payload.size() - d.byte_offset < d.byte_length) {
      throw ChecksumError("container truncated: array '" + d.name + "' extends past end of file");
    }
    auto slice = payload.subspan(static_cast<std::size_t>(d.byte_offset), static_cast<std::size_t>(d.byte_length));
    if (crc32(slice) != d.crc32) throw ChecksumError("checksum mismatch for array '" + d.name + "'");
    bundle.arrays.push_back(NamedArray{d.name, decode_array(slice, d.dtype, d.shape), d.dtype});
  }
  return bundle;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("cannot read " + path.string());
  }
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace stormnet
