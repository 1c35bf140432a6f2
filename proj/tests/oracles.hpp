// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the engine's math; it only reads the
// parameter layout (row-major in x out weights, then biases, per layer).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "core/nn.hpp"

namespace oracle {

inline clfake::nn::ModelSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<std::size_t> width(1, 6);
  clfake::nn::ModelSpec spec;
  spec.layer_widths.push_back(width(rng));
  const int hidden = depth(rng) - 1;
  for (int i = 0; i < hidden; ++i) spec.layer_widths.push_back(width(rng));
  spec.layer_widths.push_back(2);
  return spec;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n,
                                         double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Affine + relu chain written with plain loops. `pattern`, when non-null,
// receives the sign of every hidden pre-activation.
inline std::array<double, 2> mlp_forward(const std::vector<std::size_t>& widths,
                                         const std::vector<double>& theta,
                                         const std::vector<double>& input,
                                         std::vector<bool>* pattern = nullptr) {
  std::vector<double> a = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      double s = theta[offset + in * out + j];
      for (std::size_t i = 0; i < in; ++i) s += a[i] * theta[offset + i * out + j];
      z[j] = s;
    }
    offset += (in + 1) * out;
    const bool last = l + 2 == widths.size();
    if (!last) {
      for (auto& v : z) {
        if (pattern) pattern->push_back(v > 0.0);
        v = v > 0.0 ? v : 0.0;
      }
    }
    a = std::move(z);
  }
  return {a[0], a[1]};
}

inline double ce_from_logits(const std::array<double, 2>& z, int label) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[label];
}

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
};

inline double batch_loss(const std::vector<std::size_t>& widths,
                         const std::vector<double>& theta, const Batch& b,
                         std::vector<bool>* pattern = nullptr) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.inputs.size(); ++i) {
    s += ce_from_logits(mlp_forward(widths, theta, b.inputs[i], pattern), b.labels[i]);
  }
  return s / static_cast<double>(b.inputs.size());
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // components whose stencil crosses a relu kink
};

// Relative error |a - n| / max(|a|, |n|, floor) between the engine's backward
// pass and central differences of the oracle loss.
inline GradCheck gradient_check_detail(const clfake::nn::ModelSpec& spec,
                                       std::mt19937_64& rng, double h = 1e-5,
                                       double floor = 1e-8) {
  using namespace clfake::nn;
  const std::size_t n_samples = 4;
  Batch b;
  LabeledSet set;
  set.width = spec.input_width();
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto x = random_vector(rng, spec.input_width());
    const int y = static_cast<int>(rng() % 2);
    set.push_back(x, y);
    b.inputs.push_back(std::move(x));
    b.labels.push_back(y);
  }
  // Scaled-up init so hidden units are well away from zero and the loss is
  // not flat.
  auto theta = random_vector(rng, spec.param_count(), 0.8);
  const ParamVector params(theta);
  const auto g = backward(spec, params, BatchView::of(set),
                          [&](std::size_t i, const Logits& z) {
                            return cross_entropy_term(z, set.labels[i]);
                          });
  std::vector<bool> base_pattern;
  batch_loss(spec.layer_widths, theta, b, &base_pattern);

  GradCheck out;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double t0 = theta[k];
    std::vector<bool> pp, pm;
    theta[k] = t0 + h;
    const double lp = batch_loss(spec.layer_widths, theta, b, &pp);
    theta[k] = t0 - h;
    const double lm = batch_loss(spec.layer_widths, theta, b, &pm);
    theta[k] = t0;
    if (pp != base_pattern || pm != base_pattern) {
      ++out.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * h);
    const double analytic = g.values[k];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

inline double gradient_check(const clfake::nn::ModelSpec& spec, std::mt19937_64& rng) {
  return gradient_check_detail(spec, rng).max_rel_error;
}

// Two-sample Kolmogorov-Smirnov statistic by brute force over the pooled
// sample.
inline double ks_brute(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : pooled) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(),
                                                        [t](double x) { return x <= t; })) /
                      static_cast<double>(a.size());
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(),
                                                        [t](double x) { return x <= t; })) /
                      static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace oracle
