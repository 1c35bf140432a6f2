// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "core/errors.hpp"

namespace clfake::checkpoint {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'F', 'K', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  out.insert(out.end(), bits.begin(), bits.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    std::array<std::uint8_t, sizeof(T)> bits;
    take(bits.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
  }

  void take(std::uint8_t* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw ValidationError("checkpoint is truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& what) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown " + what + " key '" + key + "'");
    }
  }
}

}  // namespace

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

void Checkpoint::validate() const {
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ValidationError(std::string("checkpoint spec: ") + e.what());
  }
  if (params.size() != spec.param_count()) {
    throw ValidationError("checkpoint holds " + std::to_string(params.size()) +
                          " parameters, spec " + spec.to_string() + " needs " +
                          std::to_string(spec.param_count()));
  }
  if (!params.all_finite()) {
    throw ValidationError("checkpoint parameters are not finite");
  }
}

nlohmann::json spec_to_json(const nn::ModelSpec& spec) {
  return {{"layer_widths", spec.layer_widths}, {"activation", "relu"}};
}

nn::ModelSpec spec_from_json(const nlohmann::json& j) {
  nn::ModelSpec spec;
  spec.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  if (j.value("activation", std::string{"relu"}) != "relu") {
    throw ConfigError("unsupported activation");
  }
  spec.validate();
  return spec;
}

nlohmann::json strategy_to_json(const continual::Strategy& strategy) {
  if (const auto* kd = std::get_if<continual::KDConfig>(&strategy)) {
    return {{"name", "kd"},
            {"alpha", kd->alpha},
            {"beta", kd->beta},
            {"tau", kd->tau},
            {"scale_by_tau_squared", kd->scale_by_tau_squared}};
  }
  if (const auto* ewc = std::get_if<continual::EWCConfig>(&strategy)) {
    return {{"name", "ewc"},
            {"lambda", ewc->lambda},
            {"fisher_sample_count", ewc->fisher_sample_count},
            {"accumulation", ewc->accumulation == continual::Accumulation::running_sum
                                 ? "running_sum"
                                 : "per_task_list"}};
  }
  return {{"name", "transfer"}};
}

continual::Strategy strategy_from_json(const nlohmann::json& j) {
  try {
    const auto name = j.at("name").get<std::string>();
    continual::Strategy out;
    if (name == "transfer") {
      reject_unknown(j, {"name"}, "transfer strategy");
      out = continual::Transfer{};
    } else if (name == "kd") {
      reject_unknown(j, {"name", "alpha", "beta", "tau", "scale_by_tau_squared"},
                     "kd strategy");
      continual::KDConfig kd;
      kd.alpha = j.value("alpha", kd.alpha);
      kd.beta = j.value("beta", kd.beta);
      kd.tau = j.value("tau", kd.tau);
      kd.scale_by_tau_squared =
          j.value("scale_by_tau_squared", kd.scale_by_tau_squared);
      out = kd;
    } else if (name == "ewc") {
      reject_unknown(j, {"name", "lambda", "fisher_sample_count", "accumulation"},
                     "ewc strategy");
      continual::EWCConfig ewc;
      ewc.lambda = j.value("lambda", ewc.lambda);
      ewc.fisher_sample_count =
          j.value("fisher_sample_count", ewc.fisher_sample_count);
      const auto acc = j.value("accumulation", std::string{"per_task_list"});
      if (acc == "per_task_list") {
        ewc.accumulation = continual::Accumulation::per_task_list;
      } else if (acc == "running_sum") {
        ewc.accumulation = continual::Accumulation::running_sum;
      } else {
        throw ConfigError("unknown EWC accumulation '" + acc + "'");
      }
      out = ewc;
    } else {
      throw ConfigError("unknown strategy '" + name +
                        "' (expected transfer, kd or ewc)");
    }
    continual::validate(out);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed strategy: ") + e.what());
  }
}

nlohmann::json trace_to_json(const continual::TrainingTrace& trace) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : trace.epochs) {
    epochs.push_back({e.epoch, e.lr, e.train_loss, e.val_accuracy, e.val_loss});
  }
  return {{"best_epoch", trace.best_epoch},
          {"stopped_early", trace.stopped_early},
          {"epochs", epochs}};
}

continual::TrainingTrace trace_from_json(const nlohmann::json& j) {
  continual::TrainingTrace trace;
  trace.best_epoch = j.at("best_epoch").get<int>();
  trace.stopped_early = j.at("stopped_early").get<bool>();
  for (const auto& e : j.at("epochs")) {
    trace.epochs.push_back({e.at(0).get<int>(), e.at(1).get<double>(),
                            e.at(2).get<double>(), e.at(3).get<double>(),
                            e.at(4).get<double>()});
  }
  return trace;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  ckpt.validate();
  const nlohmann::json header = {{"spec", spec_to_json(ckpt.spec)},
                                 {"strategy", strategy_to_json(ckpt.strategy)},
                                 {"seed", ckpt.seed},
                                 {"trace", trace_to_json(ckpt.trace)},
                                 {"metadata", ckpt.metadata}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  put<std::uint64_t>(out, ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    put<double>(out, ckpt.params[i]);
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 + 8 + 8) {
    throw ValidationError("checkpoint is truncated");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a clfake checkpoint (bad magic)");
  }
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  if (tail.get<std::uint64_t>() != fnv1a(body)) {
    throw ValidationError("checkpoint checksum mismatch");
  }
  Reader in(body);
  std::array<std::uint8_t, sizeof(kMagic)> magic;
  in.take(magic.data(), magic.size());
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw ValidationError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > in.remaining()) throw ValidationError("checkpoint is truncated");
  std::string text(header_len, '\0');
  in.take(reinterpret_cast<std::uint8_t*>(text.data()), header_len);
  const auto count = in.get<std::uint64_t>();
  if (count > in.remaining() / 8 || in.remaining() != count * 8) {
    throw ValidationError("checkpoint parameter block has the wrong size");
  }
  std::vector<double> values(count);
  for (auto& v : values) v = in.get<double>();

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.spec = spec_from_json(header.at("spec"));
    ckpt.strategy = strategy_from_json(header.at("strategy"));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.trace = trace_from_json(header.at("trace"));
    ckpt.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint header is malformed: ") +
                          e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint header is invalid: ") +
                          e.what());
  }
  ckpt.params = nn::ParamVector(std::move(values));
  ckpt.validate();
  return ckpt;
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace clfake::checkpoint
