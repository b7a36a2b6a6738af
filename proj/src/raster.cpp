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

#include "terrainseg/raster.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

cv::Mat load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIoFailure, "no such file: " + path.string());
  }
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorCode::kCorruptFile, "cannot decode " + path.string());
  return raw;
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

LabelMask read_mask(const std::filesystem::path& path) {
  cv::Mat raw = load(path);
  if (raw.depth() != CV_8U) {
    throw Error(ErrorCode::kCorruptFile, "mask is not 8-bit: " + path.string());
  }
  cv::Mat single;
  if (raw.channels() == 1) {
    single = raw;
  } else if (raw.channels() == 3 || raw.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(raw, planes);
    for (int c = 1; c < 3; ++c) {
      if (cv::countNonZero(planes[0] != planes[c]) != 0) {
        throw Error(ErrorCode::kCorruptFile, "multi-channel mask with differing channels: " + path.string());
      }
    }
    single = planes[0];
  } else {
    throw Error(ErrorCode::kCorruptFile, "unsupported mask channel count: " + path.string());
  }
  LabelMask mask(single.rows, single.cols);
  for (int r = 0; r < single.rows; ++r) {
    const auto* row = single.ptr<std::uint8_t>(r);
    std::copy(row, row + single.cols, mask.values.begin() + static_cast<std::ptrdiff_t>(r) * single.cols);
  }
  return mask;
}

void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  ensure_parent(path);
  cv::Mat mat(mask.height, mask.width, CV_8UC1, const_cast<std::uint8_t*>(mask.values.data()));
  if (!cv::imwrite(path.string(), mat)) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

Image read_image_u8(const std::filesystem::path& path) {
  cv::Mat raw = load(path);
  cv::Mat eight;
  if (raw.depth() == CV_8U) {
    eight = raw;
  } else if (raw.depth() == CV_16U) {
    raw.convertTo(eight, CV_8U, 1.0 / 257.0);
  } else {
    throw Error(ErrorCode::kCorruptFile, "unsupported image depth: " + path.string());
  }
  cv::Mat rgb;
  switch (eight.channels()) {
    case 1: rgb = eight; break;
    case 3: cv::cvtColor(eight, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(eight, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw Error(ErrorCode::kCorruptFile, "unsupported channel count: " + path.string());
  }
  Image image(rgb.channels(), rgb.rows, rgb.cols);
  for (int r = 0; r < rgb.rows; ++r) {
    const auto* row = rgb.ptr<std::uint8_t>(r);
    for (int c = 0; c < rgb.cols; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) image.at(ch, r, c) = row[c * image.channels + ch];
    }
  }
  return image;
}

void write_image_u8(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "write_image_u8 needs 1 or 3 channels");
  }
  ensure_parent(path);
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int r = 0; r < image.height; ++r) {
    auto* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) {
        // BGR on disk
        const int src = image.channels == 3 ? 2 - ch : ch;
        row[c * image.channels + ch] = cv::saturate_cast<std::uint8_t>(image.at(src, r, c));
      }
    }
  }
  if (!cv::imwrite(path.string(), mat)) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

}  // namespace terrainseg
