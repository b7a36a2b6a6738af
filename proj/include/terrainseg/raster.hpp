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

#ifndef TERRAINSEG_RASTER_HPP_
#define TERRAINSEG_RASTER_HPP_

#include <filesystem>
#include <vector>

#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

// Planar float image, channel-major (C x H x W).
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  float at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  float& at(int c, int row, int col) {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  bool operator==(const Image&) const = default;
};

// 8-bit single-channel mask. A 3-channel file is accepted when all channels
// agree. Throws IO_FAILURE for missing files and CORRUPT_FILE otherwise.
LabelMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const LabelMask& mask);

// Decoded 8-bit raster, values in [0, 255], channels in RGB order.
Image read_image_u8(const std::filesystem::path& path);
// Writes an Image whose values are in [0, 255] (1 or 3 channels).
void write_image_u8(const std::filesystem::path& path, const Image& image);

}  // namespace terrainseg

#endif  // TERRAINSEG_RASTER_HPP_
