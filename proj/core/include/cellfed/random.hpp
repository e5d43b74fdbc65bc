// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CELLFED_RANDOM_HPP
#define CELLFED_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace cellfed {

using Rng = std::mt19937_64;

/// Seed splitting rule. A stream seed is
///   splitmix64(master ^ splitmix64(fnv1a64(label) ^ splitmix64(index)))
/// so every (master, label, index) triple names an independent stream and
/// no stream depends on the order in which other streams are consumed.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cellfed

#endif  // CELLFED_RANDOM_HPP
