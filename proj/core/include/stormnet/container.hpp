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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stormnet/tensor.hpp"

namespace stormnet {

// On-disk container shared by datasets and model files.
//
// Arrays are raw little-endian, row-major: f64 as IEEE-754 binary64, u16 as
// unsigned 16-bit integers. Every array is described in a UTF-8 JSON manifest
// with its shape, byte offset, byte length and CRC-32.
//
// Directory layout (datasets): manifest.json plus one <name>.bin per array.
// Bundle layout (model files): one file holding
//   "STRMNET\0" | u32 version | u32 section-name length | section name |
//   u64 manifest length | u32 manifest CRC-32 | manifest | array payload
// with array byte offsets relative to the start of the payload.

inline constexpr int kContainerSchemaVersion = 1;

enum class DType { f64, u16 };

std::string to_string(DType dtype);
DType dtype_from_string(std::string_view name);
std::size_t dtype_size(DType dtype);

struct ArrayDescriptor {
  std::string name;
  std::string file;  // directory layout only
  DType dtype = DType::f64;
  Shape shape;
  std::uint64_t byte_offset = 0;
  std::uint64_t byte_length = 0;
  std::uint32_t crc32 = 0;
};

nlohmann::json to_json(const ArrayDescriptor& d);
ArrayDescriptor descriptor_from_json(const nlohmann::json& j);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Little-endian encoding; u16 encoding rejects values that are not
/// integers in [0, 65535].
std::vector<std::uint8_t> encode_array(const Tensor& t, DType dtype);
Tensor decode_array(std::span<const std::uint8_t> bytes, DType dtype, const Shape& shape);

struct NamedArray {
  std::string name;
  Tensor value;
  DType dtype = DType::f64;
};

struct Bundle {
  std::string section = "manifest.json";
  nlohmann::json meta;  // stored under "meta" in the manifest
  std::vector<NamedArray> arrays;
};

std::vector<std::uint8_t> encode_bundle(const Bundle& bundle);
/// Throws ChecksumError on truncation or CRC mismatch, FormatError on a bad
/// magic or unsupported version.
Bundle decode_bundle(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace stormnet
