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

#include "terrainseg/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "terrainseg/error.hpp"
#include "terrainseg/manifest.hpp"
#include "terrainseg/raster.hpp"

namespace terrainseg {

std::string_view to_string(TaxonomyVariant variant) {
  return variant == TaxonomyVariant::kFourClass ? "four_class" : "six_class";
}
std::string_view to_string(Domain domain) { return domain == Domain::kMsl ? "msl" : "m2020"; }
std::string_view to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }
std::string_view to_string(Channels channels) {
  return channels == Channels::kGray ? "gray" : "color";
}

std::optional<TaxonomyVariant> parse_taxonomy_variant(std::string_view text) {
  if (text == "four_class" || text == "FOUR_CLASS") return TaxonomyVariant::kFourClass;
  if (text == "six_class" || text == "SIX_CLASS") return TaxonomyVariant::kSixClass;
  return std::nullopt;
}
std::optional<Domain> parse_domain(std::string_view text) {
  if (text == "msl" || text == "MSL") return Domain::kMsl;
  if (text == "m2020" || text == "M2020") return Domain::kM2020;
  return std::nullopt;
}
std::optional<Split> parse_split(std::string_view text) {
  if (text == "train" || text == "TRAIN") return Split::kTrain;
  if (text == "test" || text == "TEST") return Split::kTest;
  return std::nullopt;
}
std::optional<Channels> parse_channels(std::string_view text) {
  if (text == "gray" || text == "GRAY") return Channels::kGray;
  if (text == "color" || text == "COLOR") return Channels::kColor;
  return std::nullopt;
}

ClassTaxonomy::ClassTaxonomy(TaxonomyVariant variant)
    : variant_(variant), classes_{"soil", "bedrock", "sand", "big_rock"} {
  if (variant == TaxonomyVariant::kSixClass) {
    classes_.emplace_back("rover");
    classes_.emplace_back("background");
  }
}

std::optional<int> ClassTaxonomy::index_of(std::string_view name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) return std::nullopt;
  return static_cast<int>(it - classes_.begin());
}

std::string ClassTaxonomy::display_name(int index) const {
  std::string name = classes_.at(static_cast<std::size_t>(index));
  bool word_start = true;
  for (char& c : name) {
    if (c == '_') {
      c = ' ';
      word_start = true;
    } else if (word_start) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      word_start = false;
    }
  }
  return name;
}

ClassTaxonomy make_taxonomy(TaxonomyVariant variant) { return ClassTaxonomy(variant); }

std::uint64_t MaskValidation::offending_pixels() const {
  std::uint64_t total = 0;
  for (const auto& [value, count] : offending) total += count;
  return total;
}

std::string MaskValidation::describe() const {
  std::ostringstream out;
  out << offending_pixels() << " pixel(s) with invalid labels {";
  bool first = true;
  for (const auto& [value, count] : offending) {
    out << (first ? "" : ", ") << value << ": " << count;
    first = false;
  }
  out << "}";
  return out.str();
}

MaskValidation validate_mask(const LabelMask& mask, const ClassTaxonomy& taxonomy) {
  MaskValidation result;
  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t v : mask.values) ++counts[v];
  for (int v = 0; v < 256; ++v) {
    if (counts[v] != 0 && !taxonomy.is_valid_label(static_cast<std::uint8_t>(v))) {
      result.offending[v] = counts[v];
      result.valid = false;
    }
  }
  return result;
}

void require_valid_mask(const LabelMask& mask, const ClassTaxonomy& taxonomy,
                        std::string_view context) {
  MaskValidation check = validate_mask(mask, taxonomy);
  if (!check.valid) {
    std::string message = check.describe();
    if (!context.empty()) message = std::string(context) + ": " + message;
    throw Error(ErrorCode::kInvalidLabelValue, message);
  }
}

std::uint64_t ClassHistogram::labeled() const {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

std::optional<int> ClassHistogram::modal_class() const {
  if (labeled() == 0) return std::nullopt;
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

void ClassHistogram::add(const LabelMask& mask, const ClassTaxonomy& taxonomy) {
  if (counts.size() != static_cast<std::size_t>(taxonomy.num_classes())) {
    counts.assign(static_cast<std::size_t>(taxonomy.num_classes()), 0);
  }
  for (std::uint8_t v : mask.values) {
    if (v == taxonomy.ignore_value()) {
      ++ignored;
    } else {
      ++counts.at(v);
    }
  }
}

ClassHistogram& ClassHistogram::operator+=(const ClassHistogram& other) {
  if (counts.size() < other.counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t c = 0; c < other.counts.size(); ++c) counts[c] += other.counts[c];
  ignored += other.ignored;
  skipped_samples += other.skipped_samples;
  failures.insert(failures.end(), other.failures.begin(), other.failures.end());
  return *this;
}

ClassHistogram class_pixel_histogram(const DatasetManifest& manifest,
                                     const ClassTaxonomy& taxonomy) {
  ClassHistogram hist(taxonomy.num_classes());
  for (const TerrainSample& sample : manifest.entries) {
    try {
      LabelMask mask = read_mask(sample.mask_ref);
      require_valid_mask(mask, taxonomy, sample.mask_ref);
      hist.add(mask, taxonomy);
    } catch (const std::exception& e) {
      ++hist.skipped_samples;
      hist.failures.emplace_back(e.what());
    }
  }
  return hist;
}

LabelMask flatten_auxiliary_masks(const LabelMask& terrain, const LabelMask* rover,
                                  const LabelMask* range, const ClassTaxonomy& taxonomy) {
  auto check = [&](const LabelMask* aux, const char* what) {
    if (aux != nullptr && (aux->height != terrain.height || aux->width != terrain.width)) {
      throw Error(ErrorCode::kShapeMismatch, std::string(what) + " mask size differs from terrain mask");
    }
  };
  check(rover, "rover");
  check(range, "range");

  const bool six = taxonomy.variant() == TaxonomyVariant::kSixClass;
  const std::uint8_t rover_label = six ? static_cast<std::uint8_t>(*taxonomy.index_of("rover")) : kIgnoreValue;
  const std::uint8_t background_label =
      six ? static_cast<std::uint8_t>(*taxonomy.index_of("background")) : kIgnoreValue;

  LabelMask out = terrain;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (range != nullptr && range->values[i] != 0) {
      out.values[i] = background_label;
    } else if (rover != nullptr && rover->values[i] != 0) {
      out.values[i] = rover_label;
    }
  }
  return out;
}

}  // namespace terrainseg
