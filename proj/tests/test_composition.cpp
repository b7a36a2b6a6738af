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
#include <cmath>
#include <functional>
#include <set>

#include "terrainseg/composition.hpp"
#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

DatasetManifest pool(Domain domain, std::size_t n, Split split = Split::kTrain) {
  DatasetManifest m;
  m.dataset_id = std::string(to_string(domain));
  const std::string tag(to_string(domain));
  for (std::size_t i = 0; i < n; ++i) {
    m.entries.push_back({tag + "/img_" + std::to_string(i) + ".png", tag + "/lbl_" + std::to_string(i) + ".png",
                         domain, split, std::nullopt, Channels::kGray});
  }
  return m;
}

std::set<std::string> refs(const DatasetManifest& m, Domain domain) {
  std::set<std::string> out;
  for (const auto& e : m.entries) {
    if (e.domain == domain) out.insert(e.image_ref);
  }
  return out;
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

const DatasetManifest& msl_pool() {
  static const DatasetManifest m = pool(Domain::kMsl, 16064);
  return m;
}
const DatasetManifest& m2020_pool() {
  static const DatasetManifest m = pool(Domain::kM2020, 1321);
  return m;
}

}  // namespace

TEST_CASE("round half up") {
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(1.49) == 1);
  CHECK(round_half_up(660.5) == 661);
  CHECK(round_half_up(0.0) == 0);
}

TEST_CASE("mixed composition degenerate proportions") {
  const auto zero = compose_mixed({1321, 0.0, 1}, msl_pool(), m2020_pool());
  CHECK(zero.count(Domain::kM2020) == 0);
  CHECK(zero.count(Domain::kMsl) == 1321);
  const auto one = compose_mixed({1321, 1.0, 1}, msl_pool(), m2020_pool());
  CHECK(one.count(Domain::kM2020) == 1321);
  CHECK(one.count(Domain::kMsl) == 0);
}

TEST_CASE("mixed composition at the large cap") {
  const auto m = compose_mixed({16064, 0.5, 3}, msl_pool(), m2020_pool());
  CHECK(m.size() == 16064);
  CHECK(m.count(Domain::kM2020) == 661);
  CHECK(m.count(Domain::kMsl) == 15403);
  CHECK(m.seed == 3);
}

TEST_CASE("no duplicates within a composed manifest") {
  const auto m = compose_mixed({1321, 0.75, 8}, msl_pool(), m2020_pool());
  std::set<std::string> seen;
  for (const auto& e : m.entries) CHECK(seen.insert(e.image_ref).second);
}

TEST_CASE("seed sweep keeps counts and rejects repeats") {
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto runs = seed_sweep({1321, 0.25, 0}, seeds, msl_pool(), m2020_pool());
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) CHECK(r.count(Domain::kM2020) == 330);
  CHECK(refs(runs[0], Domain::kMsl) != refs(runs[1], Domain::kMsl));

  const std::vector<std::uint64_t> single = {5};
  CHECK(seed_sweep({1321, 0.25, 0}, single, msl_pool(), m2020_pool())[0] ==
        compose_mixed({1321, 0.25, 5}, msl_pool(), m2020_pool()));

  const std::vector<std::uint64_t> repeated = {7, 7};
  CHECK(code_of([&] { seed_sweep({1321, 0.25, 0}, repeated, msl_pool(), m2020_pool()); }) ==
        ErrorCode::kDuplicateSeed);
}

TEST_CASE("composition errors") {
  CHECK(code_of([&] { compose_mixed({100, 1.0, 0}, msl_pool(), m2020_pool()); }) ==
        ErrorCode::kInsufficientSource);
  CHECK(code_of([&] { compose_mixed({20000, 0.0, 0}, msl_pool(), m2020_pool()); }) ==
        ErrorCode::kInsufficientSource);
  CHECK(code_of([&] { compose_mixed({10, 0.5, 0}, pool(Domain::kMsl, 20, Split::kTest), pool(Domain::kM2020, 4)); }) ==
        ErrorCode::kSplitViolation);
  CHECK(code_of([&] { compose_mixed({10, 0.5, 0}, pool(Domain::kM2020, 20), pool(Domain::kM2020, 4)); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { compose_mixed({10, 1.5, 0}, msl_pool(), m2020_pool()); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("label fraction totals") {
  const auto full = sample_label_fraction({1.0, 1}, msl_pool(), m2020_pool());
  CHECK(full.size() == 17385);
  const auto tenth = sample_label_fraction({0.1, 1}, msl_pool(), m2020_pool());
  CHECK(tenth.size() == 1739);
  CHECK(tenth.count(Domain::kM2020) == 132);
  CHECK(code_of([&] { sample_label_fraction({0.01, 1}, pool(Domain::kMsl, 10), pool(Domain::kM2020, 10)); }) ==
        ErrorCode::kZeroSample);
  CHECK(code_of([&] { sample_label_fraction({0.0, 1}, msl_pool(), m2020_pool()); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("single-domain label fraction") {
  const auto m = sample_label_fraction({0.5, 2}, msl_pool(), DatasetManifest{});
  CHECK(m.size() == 8032);
  CHECK(m.count(Domain::kM2020) == 0);
}

TEST_CASE("property: label-fraction counts match brute-force rounding") {
  for (std::size_t msl : {0u, 1u, 7u, 100u, 16064u}) {
    for (std::size_t m2020 : {0u, 3u, 50u, 1321u}) {
      for (double f : {0.01, 0.1, 0.2, 0.33, 0.5, 0.999, 1.0}) {
        const auto total = static_cast<std::size_t>(std::floor(f * static_cast<double>(msl + m2020) + 0.5));
        if (total == 0) continue;
        const auto c = label_fraction_counts(f, msl, m2020);
        const auto m2020_expected = static_cast<std::size_t>(std::floor(f * static_cast<double>(m2020) + 0.5));
        CHECK(c.m2020 == m2020_expected);
        CHECK(c.total() == total);
        const auto msl_rounded = static_cast<std::size_t>(std::floor(f * static_cast<double>(msl) + 0.5));
        CHECK(std::max(c.msl, msl_rounded) - std::min(c.msl, msl_rounded) <= 1);
      }
    }
  }
}

TEST_CASE("property: label-fraction subsets are nested") {
  const auto small = sample_label_fraction({0.05, 4}, msl_pool(), m2020_pool());
  const auto large = sample_label_fraction({0.2, 4}, msl_pool(), m2020_pool());
  for (Domain d : {Domain::kMsl, Domain::kM2020}) {
    const auto a = refs(small, d);
    const auto b = refs(large, d);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST_CASE("property: composition is deterministic per seed") {
  for (double p : {0.25, 0.5, 0.75}) {
    const auto a = compose_mixed({1321, p, 9}, msl_pool(), m2020_pool());
    const auto b = compose_mixed({1321, p, 9}, msl_pool(), m2020_pool());
    const auto c = compose_mixed({1321, p, 10}, msl_pool(), m2020_pool());
    CHECK(a.content_hash() == b.content_hash());
    CHECK(refs(a, Domain::kMsl) != refs(c, Domain::kMsl));
    CHECK(refs(a, Domain::kM2020) != refs(c, Domain::kM2020));
  }
}

}  // namespace terrainseg
