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

#include "terrainseg/composition.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "terrainseg/error.hpp"
#include "terrainseg/rng.hpp"

namespace terrainseg {
namespace {

void check_pool(const DatasetManifest& pool, Domain domain) {
  for (const auto& e : pool.entries) {
    if (e.split != Split::kTrain) {
      throw Error(ErrorCode::kSplitViolation, "TEST sample in training pool: " + e.image_ref);
    }
    if (e.domain != domain) {
      throw Error(ErrorCode::kInvalidArgument, "pool for " + std::string(to_string(domain)) +
                                                   " contains " + std::string(to_string(e.domain)) +
                                                   " sample " + e.image_ref);
    }
  }
}

std::vector<TerrainSample> take_prefix(const DatasetManifest& pool, Domain domain, std::uint64_t seed,
                                       std::size_t count) {
  // Keyed on pool content.
  Rng rng = Rng(seed).split("pool").split(to_string(domain)).split(pool.content_hash());
  const std::vector<std::size_t> order = rng.permutation(pool.size());
  std::vector<TerrainSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool.entries[order[i]]);
  return out;
}

DatasetManifest assemble(std::vector<TerrainSample> m2020_part, std::vector<TerrainSample> msl_part,
                         std::uint64_t seed, std::string_view stream, std::string dataset_id,
                         TaxonomyVariant variant) {
  DatasetManifest out;
  out.dataset_id = std::move(dataset_id);
  out.taxonomy_variant = variant;
  out.seed = seed;
  out.entries = std::move(msl_part);
  out.entries.insert(out.entries.end(), m2020_part.begin(), m2020_part.end());
  Rng order = Rng(seed).split("order").split(stream);
  order.shuffle(out.entries);
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::size_t round_half_up(double x) {
  if (!(x >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "round_half_up expects a non-negative value");
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

DomainCounts mixed_counts(const CompositionSpec& spec, std::size_t msl_pool, std::size_t m2020_pool) {
  if (!(spec.m2020_proportion >= 0.0 && spec.m2020_proportion <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "m2020_proportion must lie in [0, 1]");
  }
  if (spec.cap == 0) throw Error(ErrorCode::kInvalidArgument, "cap must be positive");
  DomainCounts counts;
  counts.m2020 = round_half_up(spec.m2020_proportion * static_cast<double>(m2020_pool));
  if (counts.m2020 > spec.cap) {
    throw Error(ErrorCode::kInsufficientSource, std::to_string(counts.m2020) + " M2020 images exceed cap " +
                                                    std::to_string(spec.cap));
  }
  counts.msl = spec.cap - counts.m2020;
  if (counts.msl > msl_pool) {
    throw Error(ErrorCode::kInsufficientSource, "need " + std::to_string(counts.msl) + " MSL images, pool has " +
                                                    std::to_string(msl_pool));
  }
  return counts;
}

DomainCounts label_fraction_counts(double fraction, std::size_t msl_pool, std::size_t m2020_pool) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "label fraction must lie in (0, 1]");
  }
  const std::size_t total = round_half_up(fraction * static_cast<double>(msl_pool + m2020_pool));
  DomainCounts counts;
  counts.m2020 = round_half_up(fraction * static_cast<double>(m2020_pool));
  // The reconciled MSL count is within one of round_half_up(f * |MSL|).
  counts.msl = total >= counts.m2020 ? total - counts.m2020 : 0;
  counts.msl = std::min(counts.msl, msl_pool);
  if (counts.total() == 0) {
    throw Error(ErrorCode::kZeroSample, "fraction " + format_real(fraction) + " selects no images");
  }
  return counts;
}

DatasetManifest compose_mixed(const CompositionSpec& spec, const DatasetManifest& msl, const DatasetManifest& m2020) {
  check_pool(msl, Domain::kMsl);
  check_pool(m2020, Domain::kM2020);
  const DomainCounts counts = mixed_counts(spec, msl.size(), m2020.size());
  return assemble(take_prefix(m2020, Domain::kM2020, spec.seed, counts.m2020),
                  take_prefix(msl, Domain::kMsl, spec.seed, counts.msl), spec.seed, "mixed",
                  "mixed-cap" + std::to_string(spec.cap) + "-p" + format_real(spec.m2020_proportion) + "-s" +
                      std::to_string(spec.seed),
                  msl.empty() ? m2020.taxonomy_variant : msl.taxonomy_variant);
}

DatasetManifest sample_label_fraction(const LabelFractionSpec& spec, const DatasetManifest& msl,
                                      const DatasetManifest& m2020) {
  check_pool(msl, Domain::kMsl);
  check_pool(m2020, Domain::kM2020);
  const DomainCounts counts = label_fraction_counts(spec.fraction, msl.size(), m2020.size());
  return assemble(take_prefix(m2020, Domain::kM2020, spec.seed, counts.m2020),
                  take_prefix(msl, Domain::kMsl, spec.seed, counts.msl), spec.seed, "fraction",
                  "fraction-f" + format_real(spec.fraction) + "-s" + std::to_string(spec.seed),
                  msl.empty() ? m2020.taxonomy_variant : msl.taxonomy_variant);
}

std::vector<DatasetManifest> seed_sweep(const CompositionSpec& base, std::span<const std::uint64_t> seeds,
                                        const DatasetManifest& msl, const DatasetManifest& m2020) {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "seed list is empty");
  std::set<std::uint64_t> seen;
  for (auto s : seeds) {
    if (!seen.insert(s).second) throw Error(ErrorCode::kDuplicateSeed, "seed " + std::to_string(s) + " repeated");
  }
  std::vector<DatasetManifest> out;
  out.reserve(seeds.size());
  for (auto s : seeds) {
    CompositionSpec spec = base;
    spec.seed = s;
    out.push_back(compose_mixed(spec, msl, m2020));
  }
  return out;
}

}  // namespace terrainseg
