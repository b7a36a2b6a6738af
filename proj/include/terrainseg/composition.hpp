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

#ifndef TERRAINSEG_COMPOSITION_HPP_
#define TERRAINSEG_COMPOSITION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "terrainseg/manifest.hpp"

namespace terrainseg {

// floor(x + 0.5) for x >= 0.
std::size_t round_half_up(double x);

struct DomainCounts {
  std::size_t msl = 0;
  std::size_t m2020 = 0;
  std::size_t total() const { return msl + m2020; }
  bool operator==(const DomainCounts&) const = default;
};

// Capped mixture: m2020 = round_half_up(p * |M2020 pool|), MSL fills the
// remaining cap - m2020 slots.
struct CompositionSpec {
  std::size_t cap = 0;
  double m2020_proportion = 0.0;
  std::uint64_t seed = 0;
};

// Per-domain stratified subset: m2020 = round_half_up(f * |M2020|), total =
// round_half_up(f * (|MSL| + |M2020|)), MSL takes the difference (which is
// within one of round_half_up(f * |MSL|)).
struct LabelFractionSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

// Throws INSUFFICIENT_SOURCE / INVALID_ARGUMENT.
DomainCounts mixed_counts(const CompositionSpec& spec, std::size_t msl_pool, std::size_t m2020_pool);
// Throws ZERO_SAMPLE / INVALID_ARGUMENT.
DomainCounts label_fraction_counts(double fraction, std::size_t msl_pool, std::size_t m2020_pool);

// Each domain pool is permuted once per (seed, domain, pool hash) and subsets
// take prefixes of that permutation: for a fixed seed smaller fractions are
// contained in larger ones. The emitted order is a second seeded shuffle of
// the union. Pools must hold TRAIN entries of the matching
// domain only (SPLIT_VIOLATION / INVALID_ARGUMENT otherwise).
DatasetManifest compose_mixed(const CompositionSpec& spec, const DatasetManifest& msl,
                              const DatasetManifest& m2020);
DatasetManifest sample_label_fraction(const LabelFractionSpec& spec, const DatasetManifest& msl,
                                      const DatasetManifest& m2020);

// One compose_mixed per seed. Throws DUPLICATE_SEED or INVALID_ARGUMENT for
// an empty seed list.
std::vector<DatasetManifest> seed_sweep(const CompositionSpec& base, std::span<const std::uint64_t> seeds,
                                        const DatasetManifest& msl, const DatasetManifest& m2020);

}  // namespace terrainseg

#endif  // TERRAINSEG_COMPOSITION_HPP_
