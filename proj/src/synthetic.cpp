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

#include "terrainseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "terrainseg/error.hpp"
#include "terrainseg/raster.hpp"
#include "terrainseg/rng.hpp"

namespace terrainseg {
namespace {

int grid_split(Rng& rng, int extent) {
  // Somewhere in the middle half, snapped to a multiple of 4.
  const int cells = extent / 4;
  const int lo = std::max(1, cells / 4);
  const int hi = std::max(lo, cells - cells / 4);
  return 4 * (lo + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(hi - lo + 1))));
}

}  // namespace

std::string_view to_string(SyntheticLayout layout) {
  return layout == SyntheticLayout::kQuadrants ? "quadrants" : "patches";
}

std::optional<SyntheticLayout> parse_synthetic_layout(std::string_view text) {
  if (text == "quadrants") return SyntheticLayout::kQuadrants;
  if (text == "patches") return SyntheticLayout::kPatches;
  return std::nullopt;
}

void SyntheticSpec::validate() const {
  if (count <= 0 || height < 8 || width < 8) throw Error(ErrorCode::kInvalidArgument, "synthetic size too small");
  if (ignore_rows < 0 || ignore_rows >= height / 2) throw Error(ErrorCode::kInvalidArgument, "ignore_rows out of range");
  const int classes = make_taxonomy(taxonomy).num_classes();
  if (layout == SyntheticLayout::kPatches) {
    if (minority_class <= 0 || minority_class >= classes) {
      throw Error(ErrorCode::kInvalidArgument, "minority_class must be a non-zero class index");
    }
    if (minority_fraction <= 0.0 || minority_fraction >= 0.25) {
      throw Error(ErrorCode::kInvalidArgument, "minority_fraction must lie in (0, 0.25)");
    }
  }
}

double synthetic_gray_level(int cls, int num_classes) {
  return 30.0 + 200.0 * static_cast<double>(cls) / static_cast<double>(num_classes - 1);
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& root) {
  spec.validate();
  const auto tax = make_taxonomy(spec.taxonomy);
  const int classes = tax.num_classes();
  const Rng base = Rng(spec.seed).split("synthetic").split(spec.dataset_id);

  DatasetManifest manifest;
  manifest.dataset_id = spec.dataset_id;
  manifest.taxonomy_variant = spec.taxonomy;
  manifest.seed = spec.seed;

  std::vector<int> majority;
  for (int c = 0; c < classes; ++c) {
    if (spec.layout == SyntheticLayout::kQuadrants || c != spec.minority_class) majority.push_back(c);
  }
  std::vector<int> pool;  // balanced region assignment across the set

  for (int i = 0; i < spec.count; ++i) {
    Rng rng = base.split(static_cast<std::uint64_t>(i));
    const int split_y = grid_split(rng, spec.height);
    const int split_x = grid_split(rng, spec.width);
    std::array<int, 4> region{};
    for (int& r : region) {
      if (pool.empty()) {
        pool = majority;
        rng.shuffle(pool);
      }
      r = pool.back();
      pool.pop_back();
    }

    LabelMask mask(spec.height, spec.width, 0);
    std::vector<double> gray(static_cast<std::size_t>(spec.height) * spec.width);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int cls = region[static_cast<std::size_t>((y >= split_y ? 2 : 0) + (x >= split_x ? 1 : 0))];
        mask.at(y, x) = static_cast<std::uint8_t>(cls);
        gray[static_cast<std::size_t>(y) * spec.width + x] = synthetic_gray_level(cls, classes);
      }
    }

    if (spec.layout == SyntheticLayout::kPatches) {
      const double area = spec.minority_fraction * spec.height * spec.width;
      const double radius = std::sqrt(area / M_PI);
      const int margin = static_cast<int>(std::ceil(radius)) + 1;
      const double cy = margin + rng.uniform01() * (spec.height - 2 * margin - 1);
      const double cx = margin + rng.uniform01() * (spec.width - 2 * margin - 1);
      const double level = synthetic_gray_level(0, classes) + spec.minority_contrast;
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double dy = y - cy;
          const double dx = x - cx;
          if (dy * dy + dx * dx <= radius * radius) {
            mask.at(y, x) = static_cast<std::uint8_t>(spec.minority_class);
            gray[static_cast<std::size_t>(y) * spec.width + x] = level;
          }
        }
      }
    }

    for (int y = 0; y < spec.ignore_rows; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        mask.at(y, x) = kIgnoreValue;
        gray[static_cast<std::size_t>(y) * spec.width + x] = 250.0;
      }
    }

    const int channels = spec.channels == Channels::kColor ? 3 : 1;
    Image image(channels, spec.height, spec.width);
    // Colour images carry a mild tint that grayscale conversion removes.
    const double tint[3] = {1.04, 1.0, 0.93};
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double v = gray[static_cast<std::size_t>(y) * spec.width + x] + rng.normal() * spec.noise_stddev;
        for (int ch = 0; ch < channels; ++ch) {
          const double t = channels == 3 ? tint[ch] : 1.0;
          image.at(ch, y, x) = static_cast<float>(std::clamp(std::round(v * t), 0.0, 255.0));
        }
      }
    }

    char stem[64];
    std::snprintf(stem, sizeof(stem), "_%04d.png", i);
    const auto image_path = root / "images" / (spec.dataset_id + stem);
    const auto mask_path = root / "labels" / (spec.dataset_id + stem);
    write_image_u8(image_path, image);
    write_mask(mask_path, mask);

    TerrainSample sample;
    sample.image_ref = image_path.lexically_normal().generic_string();
    sample.mask_ref = mask_path.lexically_normal().generic_string();
    sample.domain = spec.domain;
    sample.split = spec.split;
    sample.channels = spec.channels;
    manifest.entries.push_back(std::move(sample));
  }
  write_manifest(manifest, root / "manifest.tsv");
  return manifest;
}

}  // namespace terrainseg
