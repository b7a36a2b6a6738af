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

#include "terrainseg/nn/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "terrainseg/error.hpp"

namespace terrainseg::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "archive payloads assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& source) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kCorruptFile, source + ": truncated archive header");
  return value;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const NamedTensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void Archive::add(std::string name, std::vector<std::int64_t> shape, std::vector<float> data) {
  tensors.push_back({std::move(name), std::move(shape), std::move(data)});
}

void write_archive(const Archive& archive, const std::filesystem::path& path) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : archive.tensors) {
    if (element_count(t.shape) != static_cast<std::int64_t>(t.data.size())) {
      throw Error(ErrorCode::kShapeMismatch, "tensor " + t.name + " data does not match its shape");
    }
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
    out.write(kArchiveMagic, 8);
    put<std::uint32_t>(out, kArchiveVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : archive.tensors) {
      out.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + source);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kArchiveMagic, 8) != 0) {
    throw Error(ErrorCode::kCorruptFile, source + ": not a terrainseg archive");
  }
  const auto version = get<std::uint32_t>(in, source);
  if (version != kArchiveVersion) {
    throw Error(ErrorCode::kCorruptFile, source + ": unsupported archive version " + std::to_string(version));
  }
  const auto header_size = get<std::uint64_t>(in, source);
  std::string text(header_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw Error(ErrorCode::kCorruptFile, source + ": truncated archive header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, source + ": bad archive header: " + e.what());
  }
  Archive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  const auto base = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = element_count(t.shape);
    if (count < 0) throw Error(ErrorCode::kCorruptFile, source + ": negative shape for " + t.name);
    t.data.resize(static_cast<std::size_t>(count));
    in.seekg(base + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::kCorruptFile, source + ": truncated payload for " + t.name);
    archive.tensors.push_back(std::move(t));
  }
  return archive;
}

}  // namespace terrainseg::nn
