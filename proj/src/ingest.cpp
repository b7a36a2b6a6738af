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

#include "terrainseg/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <regex>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

namespace fs = std::filesystem;

const std::array<std::string, 7> kImageExtensions = {".jpg", ".jpeg", ".png", ".tif", ".tiff", ".bmp", ".pgm"};
const std::array<std::string, 4> kMaskExtensions = {".png", ".tif", ".tiff", ".bmp"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <std::size_t N>
bool has_extension(const fs::path& p, const std::array<std::string, N>& exts) {
  const std::string ext = lower(p.extension().string());
  return std::find(exts.begin(), exts.end(), ext) != exts.end();
}

template <std::size_t N>
std::map<std::string, fs::path> index_by_stem(const fs::path& dir, const std::array<std::string, N>& exts,
                                              const std::vector<std::string>& suffixes) {
  std::map<std::string, fs::path> by_stem;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_extension(entry.path(), exts)) continue;
    std::string stem = entry.path().stem().string();
    for (const auto& suffix : suffixes) {
      if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
        stem.resize(stem.size() - suffix.size());
        break;
      }
    }
    auto [it, inserted] = by_stem.emplace(stem, entry.path());
    if (!inserted) {
      // Keep the lexicographically first path.
      if (entry.path().generic_string() < it->second.generic_string()) it->second = entry.path();
      spdlog::warn("duplicate stem '{}' under {}", stem, dir.string());
    }
  }
  return by_stem;
}

const std::array<float, 3> kImagenetMean = {0.485f, 0.456f, 0.406f};
const std::array<float, 3> kImagenetStd = {0.229f, 0.224f, 0.225f};

}  // namespace

std::optional<std::size_t> expected_count(Domain domain, Split split) {
  if (domain == Domain::kMsl) return split == Split::kTrain ? 16064 : 322;
  return split == Split::kTrain ? 1321 : 49;
}

Channels default_channels(Domain domain, Split split) {
  // M2020 training images are colour NAVCAM frames; every other set is grayscale.
  return domain == Domain::kM2020 && split == Split::kTrain ? Channels::kColor : Channels::kGray;
}

ScanResult scan_dataset(const fs::path& root, Domain domain, Split split, const ScanOptions& options) {
  const fs::path image_dir = root / options.image_subdir;
  const fs::path mask_dir = root / options.mask_subdir;
  ScanResult result;
  result.expected_count = expected_count(domain, split);
  result.manifest.dataset_id = options.dataset_id.empty()
                                   ? std::string(to_string(domain)) + "-" + std::string(to_string(split))
                                   : options.dataset_id;
  result.manifest.taxonomy_variant = options.taxonomy_variant;

  if (!fs::is_directory(image_dir) || !fs::is_directory(mask_dir)) {
    throw Error(ErrorCode::kEmptyDataset, "expected " + image_dir.string() + " and " + mask_dir.string());
  }
  const auto images = index_by_stem(image_dir, kImageExtensions, {});
  const auto masks = index_by_stem(mask_dir, kMaskExtensions, options.mask_stem_suffixes);

  std::optional<std::regex> sol_regex;
  if (options.sol_pattern) sol_regex.emplace(*options.sol_pattern);

  for (const auto& [stem, image_path] : images) {
    auto mask_it = masks.find(stem);
    if (mask_it == masks.end()) {
      result.missing_masks.push_back(image_path.generic_string());
      continue;
    }
    TerrainSample sample;
    sample.image_ref = image_path.lexically_normal().generic_string();
    sample.mask_ref = mask_it->second.lexically_normal().generic_string();
    sample.domain = domain;
    sample.split = split;
    sample.channels = default_channels(domain, split);
    if (options.probe_channels) {
      cv::Mat probe = cv::imread(image_path.string(), cv::IMREAD_UNCHANGED);
      if (!probe.empty()) sample.channels = probe.channels() >= 3 ? Channels::kColor : Channels::kGray;
    }
    if (sol_regex) {
      std::smatch match;
      const std::string s = stem;
      if (std::regex_search(s, match, *sol_regex) && match.size() > 1) sample.sol = std::stoi(match[1].str());
    }
    result.manifest.entries.push_back(std::move(sample));
  }
  for (const auto& [stem, mask_path] : masks) {
    if (!images.contains(stem)) result.missing_images.push_back(mask_path.generic_string());
  }
  std::sort(result.manifest.entries.begin(), result.manifest.entries.end(),
            [](const TerrainSample& a, const TerrainSample& b) { return a.image_ref < b.image_ref; });

  if (!result.missing_masks.empty()) {
    spdlog::warn("MISSING_MASK: {} image(s) without a mask under {}", result.missing_masks.size(), root.string());
  }
  if (!result.missing_images.empty()) {
    spdlog::warn("MISSING_IMAGE: {} mask(s) without an image under {}", result.missing_images.size(), root.string());
  }
  if (result.manifest.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no image/mask pairs under " + root.string());
  }
  spdlog::info("scanned {} {} {}: {} pairs (published size {})", root.string(), to_string(domain),
               to_string(split), result.manifest.size(), result.expected_count.value_or(0));
  return result;
}

void PreprocessSpec::validate() const {
  if (height <= 0 || width <= 0) throw Error(ErrorCode::kConfigError, "target size must be positive");
  if (replicate_channels != 1 && replicate_channels != 3) {
    throw Error(ErrorCode::kConfigError, "replicate_channels must be 1 or 3");
  }
  if (!to_grayscale && replicate_channels != 3) {
    throw Error(ErrorCode::kConfigError, "colour input requires replicate_channels = 3");
  }
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  Image out(image.channels, height, width);
  for (int c = 0; c < image.channels; ++c) {
    cv::Mat src(image.height, image.width, CV_32FC1,
                const_cast<float*>(image.data.data() + static_cast<std::size_t>(c) * image.height * image.width));
    cv::Mat dst(height, width, CV_32FC1, out.data.data() + static_cast<std::size_t>(c) * height * width);
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  }
  return out;
}

LabelMask resize_nearest(const LabelMask& mask, int height, int width) {
  if (mask.height == height && mask.width == width) return mask;
  LabelMask out(height, width);
  for (int r = 0; r < height; ++r) {
    const int src_r = std::min(mask.height - 1, static_cast<int>((r + 0.5) * mask.height / height));
    for (int c = 0; c < width; ++c) {
      const int src_c = std::min(mask.width - 1, static_cast<int>((c + 0.5) * mask.width / width));
      out.at(r, c) = mask.at(src_r, src_c);
    }
  }
  return out;
}

PreparedSample preprocess_arrays(const Image& raw_image, const LabelMask& raw_mask, const PreprocessSpec& spec,
                                 const ClassTaxonomy& taxonomy) {
  spec.validate();
  if (raw_image.height != raw_mask.height || raw_image.width != raw_mask.width) {
    throw Error(ErrorCode::kCorruptFile, "image and mask dimensions differ");
  }
  if (raw_image.channels != 1 && raw_image.channels != 3) {
    throw Error(ErrorCode::kCorruptFile, "image must have 1 or 3 channels");
  }
  require_valid_mask(raw_mask, taxonomy);

  // Channel policy first, at native resolution.
  Image staged;
  if (spec.to_grayscale) {
    staged = Image(1, raw_image.height, raw_image.width);
    if (raw_image.channels == 1) {
      staged.data = raw_image.data;
    } else {
      // ITU-R BT.601 luma, the same weights as cv::COLOR_RGB2GRAY.
      const std::size_t plane = static_cast<std::size_t>(raw_image.height) * raw_image.width;
      for (std::size_t i = 0; i < plane; ++i) {
        staged.data[i] = 0.299f * raw_image.data[i] + 0.587f * raw_image.data[plane + i] +
                         0.114f * raw_image.data[2 * plane + i];
      }
    }
  } else if (raw_image.channels == 1) {
    staged = Image(3, raw_image.height, raw_image.width);
    for (int c = 0; c < 3; ++c) {
      std::copy(raw_image.data.begin(), raw_image.data.end(),
                staged.data.begin() + static_cast<std::ptrdiff_t>(c) * raw_image.height * raw_image.width);
    }
  } else {
    staged = raw_image;
  }

  Image resized = resize_bilinear(staged, spec.height, spec.width);
  const int out_channels = spec.output_channels();
  PreparedSample prepared;
  prepared.image = Image(out_channels, spec.height, spec.width);
  const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
  for (int c = 0; c < out_channels; ++c) {
    const int src_c = resized.channels == 1 ? 0 : c;
    float mean = 0.0f;
    float stddev = 1.0f;
    if (spec.normalization == InputNormalization::kImagenet) {
      if (out_channels == 1) {
        mean = (kImagenetMean[0] + kImagenetMean[1] + kImagenetMean[2]) / 3.0f;
        stddev = (kImagenetStd[0] + kImagenetStd[1] + kImagenetStd[2]) / 3.0f;
      } else {
        mean = kImagenetMean[static_cast<std::size_t>(c)];
        stddev = kImagenetStd[static_cast<std::size_t>(c)];
      }
    }
    const float* src = resized.data.data() + static_cast<std::size_t>(src_c) * plane;
    float* dst = prepared.image.data.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] / 255.0f - mean) / stddev;
  }
  prepared.mask = resize_nearest(raw_mask, spec.height, spec.width);
  return prepared;
}

PreparedSample preprocess_sample(const TerrainSample& sample, const PreprocessSpec& spec,
                                 const ClassTaxonomy& taxonomy) {
  Image image = read_image_u8(sample.image_ref);
  LabelMask mask = read_mask(sample.mask_ref);
  if (image.height != mask.height || image.width != mask.width) {
    throw Error(ErrorCode::kCorruptFile, "size mismatch between " + sample.image_ref + " and " + sample.mask_ref);
  }
  try {
    return preprocess_arrays(image, mask, spec, taxonomy);
  } catch (const Error& e) {
    throw Error(e.code(), sample.mask_ref + ": " + e.what());
  }
}

}  // namespace terrainseg
