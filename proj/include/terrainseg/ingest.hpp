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

#ifndef TERRAINSEG_INGEST_HPP_
#define TERRAINSEG_INGEST_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "terrainseg/manifest.hpp"
#include "terrainseg/raster.hpp"
#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

struct ScanOptions {
  std::string image_subdir = "images";
  std::string mask_subdir = "labels";
  // Stem suffixes removed from mask names before pairing (AI4Mars expert
  // labels are stored as <stem>_merged.png).
  std::vector<std::string> mask_stem_suffixes = {"_merged"};
  // When set, the first capture group of this regex applied to the image
  // stem is parsed as the sol.
  std::optional<std::string> sol_pattern;
  // Decode every image to read its channel count instead of assuming the
  // per-mission default.
  bool probe_channels = false;
  std::string dataset_id;
  TaxonomyVariant taxonomy_variant = TaxonomyVariant::kFourClass;
};

struct ScanResult {
  DatasetManifest manifest;
  std::vector<std::string> missing_masks;   // images without a mask
  std::vector<std::string> missing_images;  // masks without an image
  std::optional<std::size_t> expected_count;
};

// Published AI4Mars sizes: MSL 16,064 train / 322 test; M2020 1,321 / 49.
std::optional<std::size_t> expected_count(Domain domain, Split split);
Channels default_channels(Domain domain, Split split);

// One entry per (image, mask) stem pair under root/<image_subdir> and
// root/<mask_subdir>, sorted by image_ref. Throws EMPTY_DATASET if no pair.
ScanResult scan_dataset(const std::filesystem::path& root, Domain domain, Split split,
                        const ScanOptions& options = {});

enum class InputNormalization { kUnit, kImagenet };

struct PreprocessSpec {
  int height = 512;
  int width = 512;
  bool to_grayscale = true;
  int replicate_channels = 3;
  InputNormalization normalization = InputNormalization::kImagenet;

  // Throws CONFIG_ERROR.
  void validate() const;
  int output_channels() const { return to_grayscale ? replicate_channels : 3; }
  bool operator==(const PreprocessSpec&) const = default;
};

struct PreparedSample {
  Image image;  // normalized, output_channels() x height x width
  LabelMask mask;
};

// Resampling primitives. Images use bilinear interpolation (half-pixel
// centers); masks use nearest neighbour so no new label value can appear.
Image resize_bilinear(const Image& image, int height, int width);
LabelMask resize_nearest(const LabelMask& mask, int height, int width);

// In-memory path: raw 8-bit image (1 or 3 channels) and mask of equal size.
PreparedSample preprocess_arrays(const Image& raw_image, const LabelMask& raw_mask,
                                 const PreprocessSpec& spec, const ClassTaxonomy& taxonomy);
// Reads the pair from disk. Throws CORRUPT_FILE for undecodable or
// mismatched files and INVALID_LABEL_VALUE for out-of-taxonomy masks.
PreparedSample preprocess_sample(const TerrainSample& sample, const PreprocessSpec& spec,
                                 const ClassTaxonomy& taxonomy);

}  // namespace terrainseg

#endif  // TERRAINSEG_INGEST_HPP_
