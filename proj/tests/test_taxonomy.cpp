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

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "terrainseg/digest.hpp"
#include "terrainseg/error.hpp"
#include "terrainseg/manifest.hpp"
#include "terrainseg/raster.hpp"
#include "terrainseg/rng.hpp"
#include "terrainseg/taxonomy.hpp"
#include "test_util.hpp"

namespace terrainseg {
namespace {

LabelMask random_mask(Rng& rng, int h, int w, int classes, double ignore_share) {
  LabelMask m(h, w);
  for (auto& v : m.values) {
    v = rng.uniform01() < ignore_share ? kIgnoreValue : static_cast<std::uint8_t>(rng.uniform(classes));
  }
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("four-class taxonomy lists terrain classes in order") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  CHECK(tax.classes() == std::vector<std::string>{"soil", "bedrock", "sand", "big_rock"});
  CHECK(tax.num_classes() == 4);
  CHECK(tax.ignore_value() == 255);
  CHECK_FALSE(tax.is_class(tax.ignore_value()));
  CHECK(tax.display_name(3) == "Big Rock");
}

TEST_CASE("six-class taxonomy appends rover and background") {
  const auto tax = make_taxonomy(TaxonomyVariant::kSixClass);
  CHECK(tax.num_classes() == 6);
  CHECK(tax.index_of("rover") == 4);
  CHECK(tax.index_of("background") == 5);
  CHECK_FALSE(tax.is_class(tax.ignore_value()));
}

TEST_CASE("enum names round-trip") {
  for (auto v : {TaxonomyVariant::kFourClass, TaxonomyVariant::kSixClass}) CHECK(parse_taxonomy_variant(to_string(v)) == v);
  for (auto v : {Domain::kMsl, Domain::kM2020}) CHECK(parse_domain(to_string(v)) == v);
  for (auto v : {Split::kTrain, Split::kTest}) CHECK(parse_split(to_string(v)) == v);
  for (auto v : {Channels::kGray, Channels::kColor}) CHECK(parse_channels(to_string(v)) == v);
  CHECK_FALSE(parse_domain("mars").has_value());
}

TEST_CASE("mask validation") {
  const auto four = make_taxonomy(TaxonomyVariant::kFourClass);
  const auto six = make_taxonomy(TaxonomyVariant::kSixClass);
  CHECK(validate_mask(LabelMask(3, 3), four).valid);
  CHECK(validate_mask(LabelMask(3, 3), six).valid);

  LabelMask m(2, 2, 0);
  m.at(0, 1) = 4;
  m.at(1, 1) = 4;
  m.at(1, 0) = 7;
  const auto v = validate_mask(m, four);
  CHECK_FALSE(v.valid);
  CHECK(v.offending.at(4) == 2);
  CHECK(v.offending.at(7) == 1);
  CHECK(v.offending_pixels() == 3);
  CHECK(code_of([&] { require_valid_mask(m, four); }) == ErrorCode::kInvalidLabelValue);

  m.at(1, 0) = 5;
  CHECK(validate_mask(m, six).valid);
}

TEST_CASE("histogram of a hand-built mask") {
  testing::TempDir dir("hist");
  LabelMask m(2, 2);
  m.at(0, 0) = 0;
  m.at(0, 1) = 0;
  m.at(1, 0) = 2;
  write_mask(dir / "m.png", m);
  DatasetManifest manifest;
  manifest.entries.push_back({(dir / "img.png").string(), (dir / "m.png").string(), Domain::kMsl, Split::kTrain,
                              std::nullopt, Channels::kGray});
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  const auto h = class_pixel_histogram(manifest, tax);
  CHECK(h.counts == std::vector<std::uint64_t>{2, 0, 1, 0});
  CHECK(h.ignored == 1);
  CHECK(h.skipped_samples == 0);
  CHECK(h.modal_class() == 0);

  const auto empty = class_pixel_histogram(DatasetManifest{}, tax);
  CHECK(empty.counts == std::vector<std::uint64_t>(4, 0));
  CHECK_FALSE(empty.modal_class().has_value());
}

TEST_CASE("histogram skips unreadable and invalid masks") {
  testing::TempDir dir("histskip");
  LabelMask bad(2, 2, 9);
  write_mask(dir / "bad.png", bad);
  DatasetManifest manifest;
  manifest.entries.push_back({"a.png", (dir / "missing.png").string(), Domain::kMsl, Split::kTrain, {}, Channels::kGray});
  manifest.entries.push_back({"b.png", (dir / "bad.png").string(), Domain::kMsl, Split::kTrain, {}, Channels::kGray});
  const auto h = class_pixel_histogram(manifest, make_taxonomy(TaxonomyVariant::kFourClass));
  CHECK(h.skipped_samples == 2);
  CHECK(h.failures.size() == 2);
  CHECK(h.labeled() == 0);
}

TEST_CASE("property: labeled plus ignored equals area, histograms add") {
  Rng rng(11);
  const auto tax = make_taxonomy(TaxonomyVariant::kSixClass);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + static_cast<int>(rng.uniform(9));
    const int w = 1 + static_cast<int>(rng.uniform(9));
    const auto a = random_mask(rng, h, w, 6, 0.2);
    const auto b = random_mask(rng, w, h, 6, 0.5);
    ClassHistogram ha(6);
    ha.add(a, tax);
    CHECK(ha.labeled() + ha.ignored == a.pixel_count());
    ClassHistogram hb(6);
    hb.add(b, tax);
    ClassHistogram joint(6);
    joint.add(a, tax);
    joint.add(b, tax);
    ha += hb;
    CHECK(ha.counts == joint.counts);
    CHECK(ha.ignored == joint.ignored);
  }
}

TEST_CASE("auxiliary masks fold in with background over rover over terrain") {
  LabelMask terrain(1, 4, 1);
  terrain.at(0, 3) = kIgnoreValue;
  LabelMask rover(1, 4, 0);
  rover.at(0, 1) = 1;
  rover.at(0, 2) = 1;
  LabelMask range(1, 4, 0);
  range.at(0, 2) = 1;
  const auto six = flatten_auxiliary_masks(terrain, &rover, &range, make_taxonomy(TaxonomyVariant::kSixClass));
  CHECK(six.values == std::vector<std::uint8_t>{1, 4, 5, kIgnoreValue});
  const auto four = flatten_auxiliary_masks(terrain, &rover, &range, make_taxonomy(TaxonomyVariant::kFourClass));
  CHECK(four.values == std::vector<std::uint8_t>{1, kIgnoreValue, kIgnoreValue, kIgnoreValue});
  const auto none = flatten_auxiliary_masks(terrain, nullptr, nullptr, make_taxonomy(TaxonomyVariant::kFourClass));
  CHECK(none == terrain);
  LabelMask small(1, 2, 0);
  CHECK(code_of([&] {
          flatten_auxiliary_masks(terrain, &small, nullptr, make_taxonomy(TaxonomyVariant::kFourClass));
        }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("rng streams are reproducible and labelled splits independent") {
  Rng a(5);
  Rng b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng parent(5);
  const auto first = parent.split("x").next_u64();
  parent.next_u64();
  CHECK(parent.split("x").next_u64() == first);
  CHECK(Rng(5).split("y").next_u64() != first);

  Rng c(9);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[c.uniform(7)];
  for (int h : hits) CHECK(h > 800);

  auto p = Rng(3).permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
}

TEST_CASE("sha256 matches published test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update("a");
  h.update("bc");
  CHECK(h.hex_digest() == sha256_hex("abc"));
}

TEST_CASE("error codes carry their names") {
  const Error e(ErrorCode::kInsufficientSource, "pool too small");
  CHECK(std::string(error_code_name(e.code())) == "INSUFFICIENT_SOURCE");
  CHECK(std::string(e.what()).find("INSUFFICIENT_SOURCE") != std::string::npos);
}

}  // namespace terrainseg
