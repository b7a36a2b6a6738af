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

#ifndef TERRAINSEG_TAXONOMY_HPP_
#define TERRAINSEG_TAXONOMY_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace terrainseg {

struct DatasetManifest;

// Null / insufficient-consensus / masked pixels all carry this value.
inline constexpr std::uint8_t kIgnoreValue = 255;

enum class TaxonomyVariant { kFourClass, kSixClass };
enum class Domain { kMsl, kM2020 };
enum class Split { kTrain, kTest };
enum class Channels { kGray, kColor };

std::string_view to_string(TaxonomyVariant variant);
std::string_view to_string(Domain domain);
std::string_view to_string(Split split);
std::string_view to_string(Channels channels);
std::optional<TaxonomyVariant> parse_taxonomy_variant(std::string_view text);
std::optional<Domain> parse_domain(std::string_view text);
std::optional<Split> parse_split(std::string_view text);
std::optional<Channels> parse_channels(std::string_view text);

// Ordered class list with dense indices 0..C-1.
//   kFourClass: soil, bedrock, sand, big_rock
//   kSixClass:  the above, then rover (4), background (5)
class ClassTaxonomy {
 public:
  explicit ClassTaxonomy(TaxonomyVariant variant);

  TaxonomyVariant variant() const { return variant_; }
  const std::vector<std::string>& classes() const { return classes_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  std::uint8_t ignore_value() const { return kIgnoreValue; }

  std::optional<int> index_of(std::string_view name) const;
  bool is_class(std::uint8_t value) const { return value < classes_.size(); }
  bool is_valid_label(std::uint8_t value) const {
    return is_class(value) || value == kIgnoreValue;
  }

  // "big_rock" -> "Big Rock"
  std::string display_name(int index) const;

  bool operator==(const ClassTaxonomy& other) const { return variant_ == other.variant_; }

 private:
  TaxonomyVariant variant_;
  std::vector<std::string> classes_;
};

ClassTaxonomy make_taxonomy(TaxonomyVariant variant);

// Single-channel per-pixel class index, row-major.
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  LabelMask() = default;
  LabelMask(int h, int w, std::uint8_t fill = kIgnoreValue)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixel_count() const { return values.size(); }
  std::uint8_t at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const LabelMask&) const = default;
};

struct TerrainSample {
  std::string image_ref;
  std::string mask_ref;
  Domain domain = Domain::kMsl;
  Split split = Split::kTrain;
  std::optional<int> sol;
  Channels channels = Channels::kGray;

  bool operator==(const TerrainSample&) const = default;
};

struct MaskValidation {
  bool valid = true;
  // offending value -> pixel count
  std::map<int, std::uint64_t> offending;

  std::uint64_t offending_pixels() const;
  std::string describe() const;
};

MaskValidation validate_mask(const LabelMask& mask, const ClassTaxonomy& taxonomy);
// Throws INVALID_LABEL_VALUE carrying the offending-value histogram.
void require_valid_mask(const LabelMask& mask, const ClassTaxonomy& taxonomy,
                        std::string_view context = {});

struct ClassHistogram {
  std::vector<std::uint64_t> counts;  // per class, ignore pixels excluded
  std::uint64_t ignored = 0;
  std::uint64_t skipped_samples = 0;
  std::vector<std::string> failures;  // one message per skipped sample

  explicit ClassHistogram(int num_classes = 0) : counts(static_cast<std::size_t>(num_classes), 0) {}

  std::uint64_t labeled() const;
  // Most frequent class, if any pixel is labeled.
  std::optional<int> modal_class() const;
  void add(const LabelMask& mask, const ClassTaxonomy& taxonomy);
  ClassHistogram& operator+=(const ClassHistogram& other);
};

// Counts over every mask referenced by the manifest. Samples whose mask
// cannot be read or fails validation are skipped and reported.
ClassHistogram class_pixel_histogram(const DatasetManifest& manifest,
                                     const ClassTaxonomy& taxonomy);

// Folds MSL auxiliary masks into a terrain mask. Where both apply the
// precedence is background > rover > terrain. Under kFourClass the rover and
// range regions become ignore pixels; under kSixClass they become the rover
// and background classes. Either auxiliary mask may be absent (nullptr).
// Auxiliary masks treat any nonzero value as "inside".
LabelMask flatten_auxiliary_masks(const LabelMask& terrain, const LabelMask* rover,
                                  const LabelMask* range, const ClassTaxonomy& taxonomy);

}  // namespace terrainseg

#endif  // TERRAINSEG_TAXONOMY_HPP_
