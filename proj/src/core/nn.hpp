// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal differentiable binary classifier: an MLP with relu hidden layers and
// two output logits (real = 0, fake = 1). Parameters live in one flat vector
// so regularizers (EWC) and optimizers can address them by index.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace clfake::nn {

enum class Activation { relu };

struct ModelSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;

  void validate() const;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }
  std::size_t param_count() const;

  // Layer `l` occupies a contiguous block: an in x out row-major weight
  // matrix followed by `out` biases.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  std::size_t weight_index(std::size_t layer, std::size_t row,
                           std::size_t col) const;

  std::string to_string() const;

  bool operator==(const ModelSpec&) const = default;
};

// [input, 64, 32, 2] with relu.
ModelSpec default_spec(std::size_t input_width = 1024);

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParamVector(std::vector<double> values)
      : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const;
  // FNV-1a over the raw IEEE-754 bytes; equal checksums <=> bit-identical
  // (up to hash collisions).
  std::uint64_t checksum() const;
  bool bit_identical(const ParamVector& other) const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

using Logits = std::array<double, 2>;
using Probs = std::array<double, 2>;

// Row-major table of equally sized input vectors with binary labels.
struct LabeledSet {
  std::size_t width = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * width, width};
  }
  void push_back(std::span<const double> input, int label);
  void append(const LabeledSet& other);
};

struct BatchView {
  std::size_t width = 0;
  std::span<const double> inputs;
  std::span<const int> labels;

  std::size_t size() const { return labels.size(); }
  static BatchView of(const LabeledSet& set) {
    return {set.width, set.inputs, set.labels};
  }
};

struct OptimizerState {
  double lr_initial = 0.005;
  double lr_min = 1e-5;
  double momentum = 0.1;
  std::vector<double> velocity;
  int epoch_budget = 250;

  void validate() const;
};

// He-uniform weights, zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

Logits forward(const ModelSpec& spec, const ParamVector& params,
               std::span<const double> input);
std::vector<Logits> forward_batch(const ModelSpec& spec,
                                  const ParamVector& params,
                                  const BatchView& batch);

Probs softmax_temp(const Logits& logits, double tau);
double cross_entropy(const Probs& probs, int label);

// Per-sample loss and its derivative with respect to the two logits.
struct LossTerm {
  double loss = 0.0;
  Logits dlogits{0.0, 0.0};
};
using LossFn = std::function<LossTerm(std::size_t sample, const Logits&)>;

// Plain cross-entropy at temperature 1 against the batch labels.
LossTerm cross_entropy_term(const Logits& logits, int label);

struct Gradient {
  double loss = 0.0;  // mean over the batch
  std::vector<double> values;
};

// Exact gradient of the mean batch loss.
Gradient backward(const ModelSpec& spec, const ParamVector& params,
                  const BatchView& batch, const LossFn& loss_fn);

// Classic momentum: v <- momentum * v + g; theta <- theta - lr * v.
void sgd_step(ParamVector& params, std::span<const double> gradient,
              OptimizerState& opt, double lr);

double cosine_lr(int epoch, const OptimizerState& opt);

// Argmax with ties resolved to class 0.
int predicted_label(const Logits& logits);

double accuracy(const ModelSpec& spec, const ParamVector& params,
                const BatchView& set);

}  // namespace clfake::nn
