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

#ifndef TERRAINSEG_SYNTHETIC_HPP_
#define TERRAINSEG_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "terrainseg/manifest.hpp"
#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

// Quadrants: four regions with boundaries on a 4-pixel grid, each region a
// distinct class; classes are balanced across the set.
// Patches: three majority regions plus one small disc of minority_class whose
// gray level sits close to class 0.
enum class SyntheticLayout { kQuadrants, kPatches };

std::string_view to_string(SyntheticLayout layout);
std::optional<SyntheticLayout> parse_synthetic_layout(std::string_view text);

struct SyntheticSpec {
  int count = 32;
  int height = 64;
  int width = 64;
  TaxonomyVariant taxonomy = TaxonomyVariant::kFourClass;
  SyntheticLayout layout = SyntheticLayout::kQuadrants;
  Domain domain = Domain::kMsl;
  Split split = Split::kTrain;
  Channels channels = Channels::kGray;
  double noise_stddev = 8.0;  // gray levels
  int ignore_rows = 0;        // top rows labelled ignore
  int minority_class = 3;
  double minority_fraction = 0.01;
  double minority_contrast = 14.0;  // gray-level offset from class 0
  std::uint64_t seed = 0;
  std::string dataset_id = "synthetic";

  void validate() const;
};

// Writes images/<id>_NNNN.png and labels/<id>_NNNN.png under root and returns
// the manifest (also written to root/manifest.tsv).
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& root);

double synthetic_gray_level(int cls, int num_classes);

}  // namespace terrainseg

#endif  // TERRAINSEG_SYNTHETIC_HPP_
