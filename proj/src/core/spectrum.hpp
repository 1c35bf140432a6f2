// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

namespace clfake::spectrum {

inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kHalf = kSide / 2 + 1;  // r2c output columns
inline constexpr std::size_t kBands = 8;
inline constexpr std::size_t kFeatureCount = kBands + 2;

// |FFT| of a 32x32 row-major patch over the r2c half-plane: kSide rows (v)
// by kHalf columns (u), entry [v * kHalf + u].
std::vector<double> magnitude(std::span<const double> patch);

// Mean magnitude in 8 equal-width radial bands (DC excluded), then the pixel
// mean and variance.
using Features = std::array<double, kFeatureCount>;
Features features(std::span<const double> patch);

}  // namespace clfake::spectrum
