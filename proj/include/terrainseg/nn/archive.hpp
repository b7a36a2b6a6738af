/* Copyright 2026 The terrainseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef TERRAINSEG_NN_ARCHIVE_HPP_
#define TERRAINSEG_NN_ARCHIVE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace terrainseg::nn {

// Container layout: 8-byte magic "TSEGTNSR", uint32 version, uint64 header
// length, JSON header, then float32 little-endian payloads in manifest order.
inline constexpr char kArchiveMagic[] = "TSEGTNSR";
inline constexpr std::uint32_t kArchiveVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data);
};

// Writes to a sibling temp file, then renames it into place.
void write_archive(const Archive& archive, const std::filesystem::path& path);
Archive read_archive(const std::filesystem::path& path);

}  // namespace terrainseg::nn

#endif  // TERRAINSEG_NN_ARCHIVE_HPP_
