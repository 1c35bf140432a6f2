// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/spectrum.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "core/errors.hpp"

namespace clfake::spectrum {
namespace {

// FFTW planning is not thread-safe; the plan is made once and then only
// executed through the new-array interface, which is.
struct Plan {
  fftw_plan plan = nullptr;
  Plan() {
    double* in = fftw_alloc_real(kSide * kSide);
    fftw_complex* out = fftw_alloc_complex(kSide * kHalf);
    plan = fftw_plan_dft_r2c_2d(kSide, kSide, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
};

const Plan& plan() {
  static const Plan p;
  return p;
}

struct BandTable {
  std::array<int, kSide * kHalf> band{};
  std::array<int, kBands> count{};
  BandTable() {
    const double rmax = std::sqrt(2.0) * (kSide / 2);
    for (std::size_t v = 0; v < kSide; ++v) {
      for (std::size_t u = 0; u < kHalf; ++u) {
        const double fv = v <= kSide / 2 ? double(v) : double(v) - kSide;
        const double r = std::hypot(double(u), fv);
        int b = -1;
        if (r > 0.0) {
          b = std::min<int>(kBands - 1, static_cast<int>(r / rmax * kBands));
          ++count[b];
        }
        band[v * kHalf + u] = b;
      }
    }
  }
};

const BandTable& bands() {
  static const BandTable t;
  return t;
}

}  // namespace

std::vector<double> magnitude(std::span<const double> patch) {
  if (patch.size() != kSide * kSide) {
    throw ConfigError("spectrum expects a 32x32 patch");
  }
  double* in = fftw_alloc_real(kSide * kSide);
  fftw_complex* out = fftw_alloc_complex(kSide * kHalf);
  std::copy(patch.begin(), patch.end(), in);
  fftw_execute_dft_r2c(plan().plan, in, out);
  std::vector<double> mag(kSide * kHalf);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::hypot(out[i][0], out[i][1]);
  }
  fftw_free(in);
  fftw_free(out);
  return mag;
}

Features features(std::span<const double> patch) {
  const auto mag = magnitude(patch);
  const auto& table = bands();
  Features f{};
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const int b = table.band[i];
    if (b >= 0) f[b] += mag[i];
  }
  for (std::size_t b = 0; b < kBands; ++b) f[b] /= table.count[b];
  double mean = 0.0;
  for (double p : patch) mean += p;
  mean /= static_cast<double>(patch.size());
  double var = 0.0;
  for (double p : patch) var += (p - mean) * (p - mean);
  var /= static_cast<double>(patch.size());
  f[kBands] = mean;
  f[kBands + 1] = var;
  return f;
}

}  // namespace clfake::spectrum
