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

#include "terrainseg/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "terrainseg/digest.hpp"
#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

constexpr std::string_view kMagic = "#terrainseg-manifest";
constexpr int kVersion = 1;

std::string format_record(const TerrainSample& s) {
  std::string line;
  line.reserve(s.image_ref.size() + s.mask_ref.size() + 32);
  line += s.image_ref;
  line += '\t';
  line += s.mask_ref;
  line += '\t';
  line += to_string(s.domain);
  line += '\t';
  line += to_string(s.split);
  line += '\t';
  line += s.sol ? std::to_string(*s.sol) : std::string("-");
  line += '\t';
  line += to_string(s.channels);
  return line;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParseError, source + ":" + std::to_string(line_no) + ": " + what);
}

template <typename T>
bool parse_int(std::string_view text, T& value) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::size_t DatasetManifest::count(Domain domain) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.domain == domain ? 1 : 0;
  return n;
}

std::size_t DatasetManifest::count(Split split) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.split == split ? 1 : 0;
  return n;
}

std::string DatasetManifest::content_hash() const { return compute_content_hash(entries); }

std::string compute_content_hash(std::span<const TerrainSample> entries) {
  Sha256 hasher;
  for (const auto& e : entries) {
    hasher.update(format_record(e));
    hasher.update("\n");
  }
  return hasher.hex_digest();
}

void write_manifest(const DatasetManifest& manifest, std::ostream& out) {
  for (const auto& e : manifest.entries) {
    for (const std::string* ref : {&e.image_ref, &e.mask_ref}) {
      if (ref->empty() || ref->find_first_of("\t\n\r") != std::string::npos) {
        throw Error(ErrorCode::kInvalidArgument, "manifest reference is empty or contains tab/newline: '" + *ref + "'");
      }
    }
  }
  if (manifest.dataset_id.find_first_of("\t\n\r") != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "dataset_id contains tab/newline");
  }
  out << kMagic << "\tversion=" << kVersion << "\tdataset_id=" << manifest.dataset_id
      << "\ttaxonomy=" << to_string(manifest.taxonomy_variant)
      << "\tseed=" << (manifest.seed ? std::to_string(*manifest.seed) : std::string("-"))
      << "\tcontent_hash=" << manifest.content_hash() << '\n';
  for (const auto& e : manifest.entries) out << format_record(e) << '\n';
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  write_manifest(manifest, out);
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

DatasetManifest read_manifest(std::istream& in, const std::string& source) {
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::string> declared_hash;

  if (!std::getline(in, line)) parse_error(source, 1, "missing header line");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_tabs(line);
  if (header.empty() || header[0] != kMagic) parse_error(source, line_no, "header must start with " + std::string(kMagic));
  bool have_id = false;
  bool have_taxonomy = false;
  for (std::size_t i = 1; i < header.size(); ++i) {
    auto eq = header[i].find('=');
    if (eq == std::string_view::npos) parse_error(source, line_no, "malformed header field '" + std::string(header[i]) + "'");
    auto key = header[i].substr(0, eq);
    auto value = header[i].substr(eq + 1);
    if (key == "version") {
      int version = 0;
      if (!parse_int(value, version) || version != kVersion) parse_error(source, line_no, "unsupported version");
    } else if (key == "dataset_id") {
      manifest.dataset_id = std::string(value);
      have_id = true;
    } else if (key == "taxonomy") {
      auto variant = parse_taxonomy_variant(value);
      if (!variant) parse_error(source, line_no, "bad taxonomy '" + std::string(value) + "'");
      manifest.taxonomy_variant = *variant;
      have_taxonomy = true;
    } else if (key == "seed") {
      if (value != "-") {
        std::uint64_t seed = 0;
        if (!parse_int(value, seed)) parse_error(source, line_no, "bad seed '" + std::string(value) + "'");
        manifest.seed = seed;
      }
    } else if (key == "content_hash") {
      declared_hash = std::string(value);
    }
  }
  if (!have_id || !have_taxonomy) parse_error(source, line_no, "header needs dataset_id and taxonomy");

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 6) {
      parse_error(source, line_no, "expected 6 tab-separated fields, got " + std::to_string(fields.size()));
    }
    TerrainSample s;
    s.image_ref = std::string(fields[0]);
    s.mask_ref = std::string(fields[1]);
    if (s.image_ref.empty() || s.mask_ref.empty()) parse_error(source, line_no, "empty reference");
    auto domain = parse_domain(fields[2]);
    if (!domain) parse_error(source, line_no, "bad domain tag '" + std::string(fields[2]) + "'");
    s.domain = *domain;
    auto split = parse_split(fields[3]);
    if (!split) parse_error(source, line_no, "bad split '" + std::string(fields[3]) + "'");
    s.split = *split;
    if (fields[4] != "-") {
      int sol = 0;
      if (!parse_int(fields[4], sol)) parse_error(source, line_no, "bad sol '" + std::string(fields[4]) + "'");
      s.sol = sol;
    }
    auto channels = parse_channels(fields[5]);
    if (!channels) parse_error(source, line_no, "bad channels '" + std::string(fields[5]) + "'");
    s.channels = *channels;
    manifest.entries.push_back(std::move(s));
  }

  if (declared_hash && *declared_hash != manifest.content_hash()) {
    parse_error(source, 1, "content_hash does not match entries");
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open manifest " + path.string());
  return read_manifest(in, path.string());
}

DatasetManifest concat_manifests(const DatasetManifest& lhs, const DatasetManifest& rhs,
                                 std::string dataset_id) {
  DatasetManifest out;
  out.dataset_id = std::move(dataset_id);
  out.taxonomy_variant = lhs.taxonomy_variant;
  out.entries = lhs.entries;
  out.entries.insert(out.entries.end(), rhs.entries.begin(), rhs.entries.end());
  return out;
}

}  // namespace terrainseg
