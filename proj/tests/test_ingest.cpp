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

#include <fstream>
#include <set>
#include <sstream>

#include "terrainseg/error.hpp"
#include "terrainseg/ingest.hpp"
#include "terrainseg/manifest.hpp"
#include "terrainseg/raster.hpp"
#include "terrainseg/rng.hpp"
#include "test_util.hpp"

namespace terrainseg {
namespace {

DatasetManifest sample_manifest(int n) {
  DatasetManifest m;
  m.dataset_id = "demo";
  m.taxonomy_variant = TaxonomyVariant::kSixClass;
  m.seed = 42;
  for (int i = 0; i < n; ++i) {
    TerrainSample s;
    s.image_ref = "img/" + std::to_string(i) + ".jpg";
    s.mask_ref = "lbl/" + std::to_string(i) + ".png";
    s.domain = i % 2 ? Domain::kM2020 : Domain::kMsl;
    s.split = i % 3 ? Split::kTrain : Split::kTest;
    if (i % 4) s.sol = 100 + i;
    s.channels = i % 2 ? Channels::kColor : Channels::kGray;
    m.entries.push_back(s);
  }
  return m;
}

std::set<std::uint8_t> value_set(const LabelMask& m) { return {m.values.begin(), m.values.end()}; }

void write_gray(const std::filesystem::path& path, int h, int w, float value) {
  write_image_u8(path, Image(1, h, w, value));
}

}  // namespace

TEST_CASE("manifest round-trips through text") {
  for (int n : {0, 1, 7}) {
    const auto m = sample_manifest(n);
    std::stringstream buffer;
    write_manifest(m, buffer);
    const auto back = read_manifest(buffer);
    CHECK(back == m);
    CHECK(back.content_hash() == m.content_hash());
  }
  std::stringstream one;
  write_manifest(sample_manifest(1), one);
  int lines = 0;
  for (std::string line; std::getline(one, line);) lines += line.empty() || line[0] == '#' ? 0 : 1;
  CHECK(lines == 1);
}

TEST_CASE("manifest file round trip") {
  testing::TempDir dir("manifest");
  const auto m = sample_manifest(5);
  write_manifest(m, dir / "m.tsv");
  CHECK(read_manifest(dir / "m.tsv") == m);
}

TEST_CASE("bad domain tag is a parse error with the line number") {
  std::stringstream buffer;
  write_manifest(sample_manifest(2), buffer);
  std::string text = buffer.str();
  const auto pos = text.find("\tm2020\t");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "\tvenus\t");
  std::stringstream edited(text);
  try {
    read_manifest(edited, "edited.tsv");
    FAIL("expected PARSE_ERROR");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("edited.tsv:3") != std::string::npos);
  }
}

TEST_CASE("content hash tracks the entry list") {
  auto m = sample_manifest(4);
  const auto h = m.content_hash();
  m.dataset_id = "renamed";
  CHECK(m.content_hash() == h);
  m.entries[2].sol = 999;
  CHECK(m.content_hash() != h);
  auto swapped = sample_manifest(4);
  std::swap(swapped.entries[0], swapped.entries[1]);
  CHECK(swapped.content_hash() != h);
}

TEST_CASE("scan pairs images with masks and reports strays") {
  testing::TempDir dir("scan");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "labels");
  for (const char* stem : {"NLB_0101_a", "NLB_0102_b", "NLB_0103_c"}) {
    write_gray(dir.path() / "images" / (std::string(stem) + ".png"), 4, 4, 50.0f);
  }
  write_mask(dir.path() / "labels" / "NLB_0101_a_merged.png", LabelMask(4, 4, 0));
  write_mask(dir.path() / "labels" / "NLB_0102_b.png", LabelMask(4, 4, 1));
  write_mask(dir.path() / "labels" / "NLB_0199_z_merged.png", LabelMask(4, 4, 1));

  ScanOptions options;
  options.sol_pattern = "NLB_(\\d+)_";
  const auto r = scan_dataset(dir.path(), Domain::kMsl, Split::kTrain, options);
  REQUIRE(r.manifest.size() == 2);
  CHECK(r.manifest.entries[0].sol == 101);
  CHECK(r.manifest.entries[1].sol == 102);
  CHECK(r.manifest.entries[0].image_ref < r.manifest.entries[1].image_ref);
  CHECK(r.missing_masks.size() == 1);
  CHECK(r.missing_images.size() == 1);
  CHECK(r.expected_count == 16064);

  const auto again = scan_dataset(dir.path(), Domain::kMsl, Split::kTrain, options);
  CHECK(again.manifest.content_hash() == r.manifest.content_hash());
}

TEST_CASE("empty tree is EMPTY_DATASET") {
  testing::TempDir dir("emptyscan");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "labels");
  CHECK_THROWS_AS(scan_dataset(dir.path(), Domain::kM2020, Split::kTest), Error);
  try {
    scan_dataset(dir.path(), Domain::kM2020, Split::kTest);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyDataset);
  }
}

TEST_CASE("published split sizes") {
  CHECK(expected_count(Domain::kMsl, Split::kTrain) == 16064);
  CHECK(expected_count(Domain::kMsl, Split::kTest) == 322);
  CHECK(expected_count(Domain::kM2020, Split::kTrain) == 1321);
  CHECK(expected_count(Domain::kM2020, Split::kTest) == 49);
  CHECK(default_channels(Domain::kM2020, Split::kTrain) == Channels::kColor);
  CHECK(default_channels(Domain::kM2020, Split::kTest) == Channels::kGray);
}

TEST_CASE("bilinear resize uses half-pixel centres") {
  Image src(1, 1, 2);
  src.data = {0.0f, 100.0f};
  const auto out = resize_bilinear(src, 1, 4);
  CHECK(out.data[0] == doctest::Approx(0.0));
  CHECK(out.data[1] == doctest::Approx(25.0));
  CHECK(out.data[2] == doctest::Approx(75.0));
  CHECK(out.data[3] == doctest::Approx(100.0));
}

TEST_CASE("property: nearest resize never invents labels") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    LabelMask m(1 + static_cast<int>(rng.uniform(20)), 1 + static_cast<int>(rng.uniform(20)));
    for (auto& v : m.values) v = rng.uniform(3) == 0 ? kIgnoreValue : static_cast<std::uint8_t>(rng.uniform(4));
    const auto r = resize_nearest(m, 1 + static_cast<int>(rng.uniform(30)), 1 + static_cast<int>(rng.uniform(30)));
    const auto src = value_set(m);
    for (auto v : value_set(r)) CHECK(src.count(v) == 1);
  }
}

TEST_CASE("preprocess msl-sized pair keeps the label set") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  Image image(1, 1024, 1024, 120.0f);
  LabelMask mask(1024, 1024, 0);
  for (int r = 0; r < 1024; ++r) {
    for (int c = 0; c < 1024; ++c) {
      if ((r / 64 + c / 64) % 3 == 1) mask.at(r, c) = kIgnoreValue;
      if ((r / 64 + c / 64) % 3 == 2) mask.at(r, c) = 3;
    }
  }
  const auto p = preprocess_arrays(image, mask, PreprocessSpec{}, tax);
  CHECK(p.image.channels == 3);
  CHECK(p.image.height == 512);
  CHECK(p.image.width == 512);
  CHECK(p.mask.height == 512);
  CHECK(value_set(p.mask) == value_set(mask));
  const auto q = preprocess_arrays(image, mask, PreprocessSpec{}, tax);
  CHECK(q.image == p.image);
  CHECK(q.mask == p.mask);
}

TEST_CASE("colour image becomes replicated grayscale") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  Image image(3, 960, 1280);
  const std::size_t plane = 960 * 1280;
  for (std::size_t i = 0; i < plane; ++i) {
    image.data[i] = 200.0f;
    image.data[plane + i] = 100.0f;
    image.data[2 * plane + i] = 50.0f;
  }
  LabelMask mask(960, 1280, 0);
  PreprocessSpec spec;
  spec.height = 64;
  spec.width = 64;
  spec.normalization = InputNormalization::kUnit;
  const auto p = preprocess_arrays(image, mask, spec, tax);
  REQUIRE(p.image.channels == 3);
  const double luma = (0.299 * 200 + 0.587 * 100 + 0.114 * 50) / 255.0;
  for (int c = 0; c < 3; ++c) CHECK(p.image.at(c, 10, 10) == doctest::Approx(luma).epsilon(1e-5));
  CHECK(value_set(p.mask) == std::set<std::uint8_t>{0});
}

TEST_CASE("preprocess rejects mismatched or invalid inputs") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  PreprocessSpec spec;
  spec.height = 8;
  spec.width = 8;
  try {
    preprocess_arrays(Image(1, 4, 4), LabelMask(4, 5, 0), spec, tax);
    FAIL("expected CORRUPT_FILE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }
  try {
    preprocess_arrays(Image(1, 4, 4), LabelMask(4, 4, 4), spec, tax);
    FAIL("expected INVALID_LABEL_VALUE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidLabelValue);
  }
  spec.replicate_channels = 2;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("preprocess from disk reports corrupt files") {
  testing::TempDir dir("corrupt");
  std::ofstream(dir / "broken.png") << "not an image";
  write_mask(dir / "m.png", LabelMask(4, 4, 0));
  TerrainSample s{(dir / "broken.png").string(), (dir / "m.png").string(), Domain::kMsl, Split::kTrain, {},
                  Channels::kGray};
  try {
    preprocess_sample(s, PreprocessSpec{}, make_taxonomy(TaxonomyVariant::kFourClass));
    FAIL("expected CORRUPT_FILE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }
}

TEST_CASE("raster round trip") {
  testing::TempDir dir("raster");
  LabelMask m(3, 5, 2);
  m.at(1, 4) = kIgnoreValue;
  write_mask(dir / "m.png", m);
  CHECK(read_mask(dir / "m.png") == m);
  Image img(3, 2, 2, 10.0f);
  img.at(2, 1, 1) = 250.0f;
  write_image_u8(dir / "i.png", img);
  CHECK(read_image_u8(dir / "i.png") == img);
  try {
    read_mask(dir / "nope.png");
    FAIL("expected IO_FAILURE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIoFailure);
  }
}

}  // namespace terrainseg
