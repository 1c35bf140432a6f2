// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace clfake {

// SplitMix64 finalizer; used to derive independent stream seeds from a
// (seed, counter) pair so results never depend on generation order.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return mix64(mix64(seed) ^ mix64(counter + 0x632be59bd9b4e019ull));
}

}  // namespace clfake
