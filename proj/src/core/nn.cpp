// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include "core/errors.hpp"

namespace clfake::nn {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

constexpr double kLogClamp = 1e-12;

void check_congruent(const ModelSpec& spec, const ParamVector& params) {
  if (params.size() != spec.param_count()) {
    throw ConfigError("parameter vector has " + std::to_string(params.size()) +
                      " entries, model " + spec.to_string() + " needs " +
                      std::to_string(spec.param_count()));
  }
}

void check_batch(const ModelSpec& spec, const BatchView& batch) {
  if (batch.width != spec.input_width()) {
    throw ConfigError("input width " + std::to_string(batch.width) +
                      " does not match model input width " +
                      std::to_string(spec.input_width()));
  }
  if (batch.inputs.size() != batch.size() * batch.width) {
    throw ConfigError("batch inputs are not a whole number of rows");
  }
}

// Affine outputs of every layer; hidden layers are stored pre-activation.
struct Activations {
  std::vector<RowMatrix> pre;
  std::vector<RowMatrix> post;
};

Activations run_forward(const ModelSpec& spec, const ParamVector& params,
                        const BatchView& batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Activations acts;
  acts.pre.reserve(spec.layer_count());
  acts.post.reserve(spec.layer_count());

  ConstMatrixMap input(batch.inputs.data(), n,
                       static_cast<Eigen::Index>(batch.width));
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
    ConstMatrixMap weights(params.data() + spec.weight_offset(l), in, out);
    ConstRowVectorMap bias(params.data() + spec.bias_offset(l), out);

    RowMatrix z = (l == 0 ? RowMatrix(input * weights)
                          : RowMatrix(acts.post.back() * weights));
    z.rowwise() += bias;
    if (l + 1 < spec.layer_count()) {
      acts.post.emplace_back(z.cwiseMax(0.0));
    } else {
      acts.post.emplace_back(z);
    }
    acts.pre.push_back(std::move(z));
  }
  return acts;
}

Logits logits_row(const RowMatrix& out, Eigen::Index i) {
  return {out(i, 0), out(i, 1)};
}

}  // namespace

void ModelSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw ConfigError("model needs at least an input and an output width");
  }
  if (layer_widths.back() != 2) {
    throw ConfigError("binary classifier must end in 2 logits");
  }
  for (auto w : layer_widths) {
    if (w == 0) throw ConfigError("layer widths must be positive");
  }
}

std::size_t ModelSpec::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    total += (layer_widths[l] + 1) * layer_widths[l + 1];
  }
  return total;
}

std::size_t ModelSpec::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += (layer_widths[l] + 1) * layer_widths[l + 1];
  }
  return offset;
}

std::size_t ModelSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_widths[layer] * layer_widths[layer + 1];
}

std::size_t ModelSpec::weight_index(std::size_t layer, std::size_t row,
                                    std::size_t col) const {
  return weight_offset(layer) + row * layer_widths[layer + 1] + col;
}

std::string ModelSpec::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    if (i) os << ',';
    os << layer_widths[i];
  }
  os << ']';
  return os.str();
}

ModelSpec default_spec(std::size_t input_width) {
  return ModelSpec{{input_width, 64, 32, 2}, Activation::relu};
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::uint64_t ParamVector::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
  for (std::size_t i = 0; i < values_.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

bool ParamVector::bit_identical(const ParamVector& other) const {
  return values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(),
                     values_.size() * sizeof(double)) == 0;
}

void LabeledSet::push_back(std::span<const double> input, int label) {
  if (width == 0 && inputs.empty()) width = input.size();
  if (input.size() != width) {
    throw ConfigError("sample width " + std::to_string(input.size()) +
                      " does not match set width " + std::to_string(width));
  }
  inputs.insert(inputs.end(), input.begin(), input.end());
  labels.push_back(label);
}

void LabeledSet::append(const LabeledSet& other) {
  if (other.empty()) return;
  if (empty() && width == 0) width = other.width;
  if (other.width != width) {
    throw ConfigError("cannot concatenate sets of different widths");
  }
  inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

void OptimizerState::validate() const {
  if (!(lr_initial > 0.0) || !(lr_min > 0.0) || lr_min > lr_initial) {
    throw ConfigError("learning rates must satisfy 0 < lr_min <= lr_initial");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (epoch_budget <= 0) throw ConfigError("epoch budget must be positive");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.param_count());
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto fan_in = spec.layer_widths[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const auto begin = spec.weight_offset(l);
    const auto end = spec.bias_offset(l);
    for (auto i = begin; i < end; ++i) params[i] = dist(rng);
  }
  return params;
}

Logits forward(const ModelSpec& spec, const ParamVector& params,
               std::span<const double> input) {
  spec.validate();
  check_congruent(spec, params);
  static constexpr int kLabel = 0;
  const BatchView one{input.size(), input, std::span<const int>(&kLabel, 1)};
  check_batch(spec, one);
  const auto acts = run_forward(spec, params, one);
  return logits_row(acts.post.back(), 0);
}

std::vector<Logits> forward_batch(const ModelSpec& spec,
                                  const ParamVector& params,
                                  const BatchView& batch) {
  spec.validate();
  check_congruent(spec, params);
  check_batch(spec, batch);
  std::vector<Logits> out(batch.size());
  // Bounded chunks keep the activation buffers small for large test sets.
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < batch.size(); start += kChunk) {
    const auto count = std::min(kChunk, batch.size() - start);
    const BatchView chunk{batch.width,
                          batch.inputs.subspan(start * batch.width,
                                               count * batch.width),
                          batch.labels.subspan(start, count)};
    const auto acts = run_forward(spec, params, chunk);
    for (std::size_t i = 0; i < count; ++i) {
      out[start + i] =
          logits_row(acts.post.back(), static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

Probs softmax_temp(const Logits& logits, double tau) {
  if (!(tau > 0.0)) throw DomainError("softmax temperature must be positive");
  const double a = logits[0] / tau;
  const double b = logits[1] / tau;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double sum = ea + eb;
  return {ea / sum, eb / sum};
}

double cross_entropy(const Probs& probs, int label) {
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kLogClamp));
}

LossTerm cross_entropy_term(const Logits& logits, int label) {
  const auto p = softmax_temp(logits, 1.0);
  LossTerm term;
  term.loss = cross_entropy(p, label);
  term.dlogits = {p[0] - (label == 0 ? 1.0 : 0.0),
                  p[1] - (label == 1 ? 1.0 : 0.0)};
  return term;
}

Gradient backward(const ModelSpec& spec, const ParamVector& params,
                  const BatchView& batch, const LossFn& loss_fn) {
  spec.validate();
  check_congruent(spec, params);
  check_batch(spec, batch);
  if (batch.size() == 0) throw ConfigError("backward needs a non-empty batch");

  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  auto acts = run_forward(spec, params, batch);

  Gradient grad;
  grad.values.assign(params.size(), 0.0);

  const RowMatrix& out = acts.post.back();
  RowMatrix delta(n, 2);
  double loss_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Logits logits = logits_row(out, i);
    if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
      throw NumericError("non-finite logits in forward pass at sample " +
                             std::to_string(i),
                         static_cast<long>(i));
    }
    const LossTerm term = loss_fn(static_cast<std::size_t>(i), logits);
    loss_sum += term.loss;
    delta(i, 0) = term.dlogits[0] * inv_n;
    delta(i, 1) = term.dlogits[1] * inv_n;
  }
  grad.loss = loss_sum * inv_n;

  ConstMatrixMap input(batch.inputs.data(), n,
                       static_cast<Eigen::Index>(batch.width));
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(spec.layer_widths[l]);
    const auto outw = static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
    Eigen::Map<RowMatrix> dweights(grad.values.data() + spec.weight_offset(l),
                                   in, outw);
    Eigen::Map<Eigen::RowVectorXd> dbias(
        grad.values.data() + spec.bias_offset(l), outw);
    if (l == 0) {
      dweights.noalias() = input.transpose() * delta;
    } else {
      dweights.noalias() = acts.post[l - 1].transpose() * delta;
    }
    dbias = delta.colwise().sum();
    if (l > 0) {
      ConstMatrixMap weights(params.data() + spec.weight_offset(l), in, outw);
      RowMatrix upstream = delta * weights.transpose();
      // relu'(z) = 1 for z > 0, else 0.
      upstream.array() *= (acts.pre[l - 1].array() > 0.0).cast<double>();
      delta = std::move(upstream);
    }
  }
  return grad;
}

void sgd_step(ParamVector& params, std::span<const double> gradient,
              OptimizerState& opt, double lr) {
  if (gradient.size() != params.size()) {
    throw ConfigError("gradient is not congruent with parameters");
  }
  if (opt.velocity.empty()) opt.velocity.assign(params.size(), 0.0);
  if (opt.velocity.size() != params.size()) {
    throw ConfigError("optimizer velocity is not congruent with parameters");
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    if (!std::isfinite(gradient[i])) {
      throw NumericError("non-finite gradient component " + std::to_string(i),
                         static_cast<long>(i));
    }
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    opt.velocity[i] = opt.momentum * opt.velocity[i] + gradient[i];
    params[i] -= lr * opt.velocity[i];
  }
}

double cosine_lr(int epoch, const OptimizerState& opt) {
  if (epoch < 0 || epoch > opt.epoch_budget) {
    throw DomainError("epoch " + std::to_string(epoch) +
                      " outside schedule [0, " +
                      std::to_string(opt.epoch_budget) + "]");
  }
  const double phase = std::numbers::pi * static_cast<double>(epoch) /
                       static_cast<double>(opt.epoch_budget);
  return opt.lr_min +
         0.5 * (opt.lr_initial - opt.lr_min) * (1.0 + std::cos(phase));
}

int predicted_label(const Logits& logits) {
  return logits[1] > logits[0] ? 1 : 0;
}

double accuracy(const ModelSpec& spec, const ParamVector& params,
                const BatchView& set) {
  if (set.size() == 0) throw ConfigError("accuracy of an empty set");
  const auto logits = forward_batch(spec, params, set);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (predicted_label(logits[i]) == set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

}  // namespace clfake::nn
