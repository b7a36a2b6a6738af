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

#ifndef TERRAINSEG_RNG_HPP_
#define TERRAINSEG_RNG_HPP_

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace terrainseg {

// xoshiro256** seeded through splitmix64. Shuffles, bounded integers and
// normals are toolchain independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent child stream identified by a label. The same (seed, label)
  // always yields the same child regardless of how many draws the parent made.
  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // Unbiased integer in [0, bound).
  std::uint64_t uniform(std::uint64_t bound);
  // Uniform double in [0, 1).
  double uniform01();
  double normal();

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // 0..n-1 in seeded random order.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace terrainseg

#endif  // TERRAINSEG_RNG_HPP_
