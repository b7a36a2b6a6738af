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

#ifndef TERRAINSEG_MANIFEST_HPP_
#define TERRAINSEG_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

// Ordered list of samples. Scans emit entries sorted by image_ref; samplers
// emit them in seeded order. The content hash covers the entries only, so
// renaming a dataset or re-labelling its seed leaves it unchanged.
struct DatasetManifest {
  std::string dataset_id;
  TaxonomyVariant taxonomy_variant = TaxonomyVariant::kFourClass;
  std::optional<std::uint64_t> seed;
  std::vector<TerrainSample> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::size_t count(Domain domain) const;
  std::size_t count(Split split) const;
  std::string content_hash() const;

  bool operator==(const DatasetManifest&) const = default;
};

std::string compute_content_hash(std::span<const TerrainSample> entries);

// Text format: a '#terrainseg-manifest' header line of tab-separated
// key=value pairs (version, dataset_id, taxonomy, seed, content_hash), then
// one tab-separated record per entry:
//   image_ref  mask_ref  domain  split  sol  channels
// sol is '-' when unknown. Reading recomputes the content hash and rejects
// a file whose header hash disagrees; a header without content_hash is
// accepted (hand-built manifests).
void write_manifest(const DatasetManifest& manifest, std::ostream& out);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(std::istream& in, const std::string& source = "<stream>");
DatasetManifest read_manifest(const std::filesystem::path& path);

// Concatenation preserving order; the result takes lhs's id and taxonomy.
DatasetManifest concat_manifests(const DatasetManifest& lhs, const DatasetManifest& rhs,
                                 std::string dataset_id);

}  // namespace terrainseg

#endif  // TERRAINSEG_MANIFEST_HPP_
