// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace clfake::taskgen {
namespace {

namespace fs = std::filesystem;

constexpr double kRealContrast = 0.15;
constexpr int kSide = static_cast<int>(kPatchSide);

Patch real_base(std::uint64_t patch_seed) {
  std::mt19937_64 rng(patch_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(kPatchPixels);
  for (auto& g : noise) g = normal(rng);

  // 3x3 box blur with wrap-around; the factor 3 restores unit variance.
  Patch patch(kPatchPixels);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = (y + dy + kSide) % kSide;
          const int xx = (x + dx + kSide) % kSide;
          sum += noise[static_cast<std::size_t>(yy * kSide + xx)];
        }
      }
      const double z = sum / 3.0;
      patch[static_cast<std::size_t>(y * kSide + x)] =
          std::clamp(0.5 + kRealContrast * z, 0.0, 1.0);
    }
  }
  return patch;
}

std::uint64_t patch_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, index);
}

// Canonical half-spectrum key: (u, v) and (-u, -v) are the same real cosine.
std::pair<int, int> canonical_bin(int u, int v) {
  u = ((u % kSide) + kSide) % kSide;
  v = ((v % kSide) + kSide) % kSide;
  const int nu = (kSide - u) % kSide;
  const int nv = (kSide - v) % kSide;
  return std::min(std::make_pair(u, v), std::make_pair(nu, nv));
}

std::map<std::pair<int, int>, double> amplitude_spectrum(
    const GeneratorSpec& gen) {
  std::map<std::pair<int, int>, double> spectrum;
  for (const auto& c : gen.fingerprint) {
    spectrum[canonical_bin(c.u, c.v)] += std::abs(c.amplitude);
  }
  return spectrum;
}

struct CatalogEntry {
  const char* name;
  Family family;
  int own_u;
  int own_v;
  double family_amplitude;
};

// Dominant bin shared by every generator of a family.
constexpr FingerprintComponent kGanBin{13, 9, 0.0};
constexpr FingerprintComponent kCgBin{4, 3, 0.0};
constexpr double kOwnAmplitude = 0.02;
constexpr double kUnknownAmplitude = 0.06;
constexpr double kUnknownNoise = 1.0;

// Long sequence order; the easy sequence is its first seven entries.
constexpr CatalogEntry kCatalog[] = {
    {"gaugan", Family::gan_like, 11, 14, 0.03},
    {"biggan", Family::gan_like, 15, 6, 0.05},
    {"cyclegan", Family::gan_like, 9, 12, 0.12},
    {"imle", Family::cg_like, 2, 6, 0.04},
    {"faceforensics", Family::cg_like, 6, 1, 0.08},
    {"crn", Family::cg_like, 5, 5, 0.18},
    {"wilddeepfake", Family::unknown_like, 8, 8, 0.0},
    {"glow", Family::cg_like, 1, 4, 0.06},
    {"stargan", Family::gan_like, 14, 11, 0.04},
    {"stylegan", Family::gan_like, 12, 5, 0.09},
    {"whichfacereal", Family::unknown_like, 7, 2, 0.0},
    {"san", Family::cg_like, 3, 1, 0.12},
};

GeneratorSpec catalog_generator(const CatalogEntry& e, std::size_t index) {
  GeneratorSpec gen;
  gen.name = e.name;
  gen.family = e.family;
  gen.seed = 1000 + index;
  switch (e.family) {
    case Family::gan_like:
      gen.fingerprint = {{kGanBin.u, kGanBin.v, e.family_amplitude},
                         {e.own_u, e.own_v, kOwnAmplitude}};
      break;
    case Family::cg_like:
      gen.fingerprint = {{kCgBin.u, kCgBin.v, e.family_amplitude},
                         {e.own_u, e.own_v, kOwnAmplitude}};
      break;
    case Family::unknown_like:
      gen.fingerprint = {{e.own_u, e.own_v, kUnknownAmplitude},
                         {e.own_v + 3, e.own_u + 1, kUnknownAmplitude}};
      gen.noise_level = kUnknownNoise;
      break;
  }
  return gen;
}

nlohmann::json to_json(const GeneratorSpec& gen) {
  nlohmann::json fp = nlohmann::json::array();
  for (const auto& c : gen.fingerprint) {
    fp.push_back({{"u", c.u}, {"v", c.v}, {"amplitude", c.amplitude}});
  }
  return {{"name", gen.name},
          {"family", family_name(gen.family)},
          {"fingerprint", fp},
          {"noise_level", gen.noise_level},
          {"seed", gen.seed}};
}

GeneratorSpec generator_from_json(const nlohmann::json& j) {
  GeneratorSpec gen;
  gen.name = j.at("name").get<std::string>();
  gen.family = parse_family(j.at("family").get<std::string>());
  for (const auto& c : j.at("fingerprint")) {
    gen.fingerprint.push_back({c.at("u").get<int>(), c.at("v").get<int>(),
                               c.at("amplitude").get<double>()});
  }
  gen.noise_level = j.value("noise_level", 0.0);
  gen.seed = j.value("seed", std::uint64_t{0});
  gen.validate();
  return gen;
}

void load_class_dir(const fs::path& dir, int label, nn::LabeledSet& out) {
  if (!fs::is_directory(dir)) {
    throw IngestionError("missing directory " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw IngestionError("no .pgm images in " + dir.string());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto patch = to_patch(read_pgm(file));
    out.push_back(patch, label);
  }
}

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::gan_like:
      return "gan_like";
    case Family::cg_like:
      return "cg_like";
    case Family::unknown_like:
      return "unknown_like";
  }
  return "unknown_like";
}

Family parse_family(const std::string& name) {
  if (name == "gan_like") return Family::gan_like;
  if (name == "cg_like") return Family::cg_like;
  if (name == "unknown_like") return Family::unknown_like;
  throw ConfigError("unknown generator family '" + name + "'");
}

void GeneratorSpec::validate() const {
  if (name.empty()) throw ConfigError("generator needs a name");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw ConfigError("generator '" + name + "' has an invalid noise level");
  }
  for (const auto& c : fingerprint) {
    if (c.u < 0 || c.u > kSide / 2 || c.v < 0 || c.v >= kSide ||
        (c.u == 0 && c.v == 0)) {
      throw ConfigError("generator '" + name + "' has frequency (" +
                        std::to_string(c.u) + "," + std::to_string(c.v) +
                        ") outside the half-spectrum");
    }
    if (!std::isfinite(c.amplitude)) {
      throw ConfigError("generator '" + name + "' has a non-finite amplitude");
    }
  }
}

double GeneratorSpec::max_amplitude() const {
  double m = 0.0;
  for (const auto& c : fingerprint) m = std::max(m, std::abs(c.amplitude));
  return m;
}

double bin_phase(int u, int v) {
  const auto key = static_cast<std::uint64_t>(u) * 64u +
                   static_cast<std::uint64_t>(v);
  const double unit =
      static_cast<double>(mix64(key ^ 0x7068617365ull) >> 11) * 0x1.0p-53;
  return 2.0 * std::numbers::pi * unit;
}

std::vector<Patch> synth_real(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("synth_real needs count >= 1");
  std::vector<Patch> patches;
  patches.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    patches.push_back(real_base(patch_seed(seed, i)));
  }
  return patches;
}

std::vector<Patch> synth_fake(const GeneratorSpec& gen, std::size_t count,
                              std::uint64_t seed) {
  gen.validate();
  if (count == 0) throw ConfigError("synth_fake needs count >= 1");
  std::vector<Patch> patches;
  patches.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto base_seed = patch_seed(seed, i);
    Patch patch = real_base(base_seed);
    std::mt19937_64 jitter_rng(derive_seed(base_seed, gen.seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& c : gen.fingerprint) {
      const double phase = bin_phase(c.u, c.v) +
                           gen.noise_level * std::numbers::pi * normal(jitter_rng);
      for (int y = 0; y < kSide; ++y) {
        for (int x = 0; x < kSide; ++x) {
          const double arg =
              2.0 * std::numbers::pi * (c.u * x + c.v * y) / kSide + phase;
          patch[static_cast<std::size_t>(y * kSide + x)] +=
              c.amplitude * std::cos(arg);
        }
      }
    }
    for (auto& p : patch) p = std::clamp(p, 0.0, 1.0);
    patches.push_back(std::move(patch));
  }
  return patches;
}

TaskDataset make_task(const GeneratorSpec& gen, const SplitSizes& sizes,
                      std::uint64_t seed) {
  if (sizes.train < 2 || sizes.val < 2 || sizes.test < 2) {
    throw ConfigError("every split needs at least 2 samples");
  }
  TaskDataset task;
  task.name = gen.name;
  task.provenance = gen.name;
  auto fill = [&](nn::LabeledSet& split, std::size_t n, std::uint64_t split_id) {
    const auto split_seed = derive_seed(seed, split_id);
    const std::size_t n_real = n / 2;
    const std::size_t n_fake = n - n_real;
    split.width = kPatchPixels;
    split.inputs.reserve(n * kPatchPixels);
    for (const auto& p : synth_real(n_real, derive_seed(split_seed, 0))) {
      split.push_back(p, 0);
    }
    for (const auto& p : synth_fake(gen, n_fake, derive_seed(split_seed, 1))) {
      split.push_back(p, 1);
    }
  };
  fill(task.train, sizes.train, 1);
  fill(task.val, sizes.val, 2);
  fill(task.test, sizes.test, 3);
  return task;
}

double similarity(const GeneratorSpec& a, const GeneratorSpec& b) {
  auto sa = amplitude_spectrum(a);
  auto sb = amplitude_spectrum(b);
  auto norm = [](const std::map<std::pair<int, int>, double>& s) {
    double sum = 0.0;
    for (const auto& [bin, amp] : s) sum += amp * amp;
    return std::sqrt(sum);
  };
  const double na = norm(sa);
  const double nb = norm(sb);
  std::set<std::pair<int, int>> bins;
  for (const auto& [bin, amp] : sa) bins.insert(bin);
  for (const auto& [bin, amp] : sb) bins.insert(bin);
  double sum = 0.0;
  for (const auto& bin : bins) {
    const double x = na > 0.0 ? sa[bin] / na : 0.0;
    const double y = nb > 0.0 ? sb[bin] / nb : 0.0;
    sum += (x - y) * (x - y);
  }
  return std::sqrt(sum);
}

std::vector<std::vector<std::size_t>> group_tasks(
    const std::vector<GeneratorSpec>& specs, std::size_t group_size,
    GroupMode mode) {
  if (specs.empty()) throw ConfigError("cannot group an empty task list");
  if (group_size == 0) throw ConfigError("group size must be >= 1");
  std::vector<std::vector<std::size_t>> groups;
  if (mode == GroupMode::paper_order) {
    for (std::size_t start = 0; start < specs.size(); start += group_size) {
      std::vector<std::size_t> g;
      for (std::size_t i = start; i < std::min(specs.size(), start + group_size);
           ++i) {
        g.push_back(i);
      }
      groups.push_back(std::move(g));
    }
    return groups;
  }
  std::vector<bool> used(specs.size(), false);
  for (std::size_t seed = 0; seed < specs.size(); ++seed) {
    if (used[seed]) continue;
    std::vector<std::size_t> g{seed};
    used[seed] = true;
    while (g.size() < group_size) {
      std::size_t best = specs.size();
      double best_d = 0.0;
      for (std::size_t j = 0; j < specs.size(); ++j) {
        if (used[j]) continue;
        // Average linkage to the members already in the group.
        double d = 0.0;
        for (auto m : g) d += similarity(specs[m], specs[j]);
        d /= static_cast<double>(g.size());
        if (best == specs.size() || d < best_d) {
          best = j;
          best_d = d;
        }
      }
      if (best == specs.size()) break;
      used[best] = true;
      g.push_back(best);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

PresetKind parse_preset(const std::string& name) {
  if (name == "easy_like") return PresetKind::easy_like;
  if (name == "long_like") return PresetKind::long_like;
  throw ConfigError("unknown preset '" + name +
                    "' (expected easy_like or long_like)");
}

std::string preset_name(PresetKind kind) {
  return kind == PresetKind::easy_like ? "easy_like" : "long_like";
}

void SequenceSpec::validate() const {
  std::set<std::string> names(task_names.begin(), task_names.end());
  if (names.size() != task_names.size()) {
    throw ConfigError("sequence lists a task twice");
  }
  if (grouping.empty()) return;
  std::vector<std::string> flat;
  for (const auto& g : grouping) {
    if (g.empty()) throw ConfigError("empty group in sequence");
    flat.insert(flat.end(), g.begin(), g.end());
  }
  std::multiset<std::string> grouped(flat.begin(), flat.end());
  std::multiset<std::string> listed(task_names.begin(), task_names.end());
  if (grouped != listed) {
    throw ConfigError("grouping must cover every task exactly once");
  }
}

Preset preset_sequence(PresetKind kind) {
  const std::size_t count = kind == PresetKind::easy_like ? 7 : 12;
  Preset preset;
  for (std::size_t i = 0; i < count; ++i) {
    preset.generators.push_back(catalog_generator(kCatalog[i], i));
    preset.sequence.task_names.push_back(kCatalog[i].name);
  }
  return preset;
}

void Manifest::validate() const {
  if (generators.empty()) throw ConfigError("manifest lists no generators");
  std::set<std::string> names;
  for (const auto& g : generators) {
    g.validate();
    if (!names.insert(g.name).second) {
      throw ConfigError("manifest lists generator '" + g.name + "' twice");
    }
  }
  sequence.validate();
  for (const auto& n : sequence.task_names) {
    if (!names.count(n)) {
      throw ConfigError("sequence names unknown task '" + n + "'");
    }
  }
  if (sizes.train < 2 || sizes.val < 2 || sizes.test < 2) {
    throw ConfigError("manifest split sizes must be >= 2");
  }
}

const GeneratorSpec& Manifest::generator(const std::string& n) const {
  return generators.at(index_of(n));
}

std::size_t Manifest::index_of(const std::string& n) const {
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].name == n) return i;
  }
  throw ConfigError("no task named '" + n + "' in manifest");
}

TaskDataset Manifest::materialize(const std::string& n) const {
  const auto& gen = generator(n);
  return make_task(gen, sizes, derive_seed(data_seed, gen.seed));
}

std::vector<TaskDataset> Manifest::materialize_all() const {
  std::vector<TaskDataset> tasks;
  tasks.reserve(sequence.task_names.size());
  for (const auto& n : sequence.task_names) tasks.push_back(materialize(n));
  return tasks;
}

Manifest make_manifest(PresetKind kind, std::uint64_t data_seed,
                       const SplitSizes& sizes) {
  auto preset = preset_sequence(kind);
  Manifest m;
  m.name = preset_name(kind);
  m.generators = std::move(preset.generators);
  m.sequence = std::move(preset.sequence);
  m.sizes = sizes;
  m.data_seed = data_seed;
  return m;
}

nlohmann::json to_json(const Manifest& manifest) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : manifest.generators) gens.push_back(to_json(g));
  nlohmann::json j{
      {"format", "clfake-manifest"},
      {"version", 1},
      {"name", manifest.name},
      {"data_seed", manifest.data_seed},
      {"sizes",
       {{"train", manifest.sizes.train},
        {"val", manifest.sizes.val},
        {"test", manifest.sizes.test}}},
      {"generators", gens},
      {"sequence", manifest.sequence.task_names},
  };
  if (!manifest.sequence.grouping.empty()) {
    j["grouping"] = manifest.sequence.grouping;
  }
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "clfake-manifest") {
      throw ConfigError("not a clfake manifest (missing format tag)");
    }
    if (j.at("version").get<int>() != 1) {
      throw ConfigError("unsupported manifest version");
    }
    Manifest m;
    m.name = j.value("name", std::string{"custom"});
    m.data_seed = j.at("data_seed").get<std::uint64_t>();
    const auto& sizes = j.at("sizes");
    m.sizes = {sizes.at("train").get<std::size_t>(),
               sizes.at("val").get<std::size_t>(),
               sizes.at("test").get<std::size_t>()};
    for (const auto& g : j.at("generators")) {
      m.generators.push_back(generator_from_json(g));
    }
    if (j.contains("sequence")) {
      m.sequence.task_names = j.at("sequence").get<std::vector<std::string>>();
    } else {
      for (const auto& g : m.generators) m.sequence.task_names.push_back(g.name);
    }
    if (j.contains("grouping")) {
      m.sequence.grouping =
          j.at("grouping").get<std::vector<std::vector<std::string>>>();
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " +
                      e.what());
  }
  return manifest_from_json(j);
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  auto next_token = [&]() {
    std::string token;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!token.empty()) break;
        continue;
      }
      token.push_back(c);
    }
    return token;
  };
  if (next_token() != "P5") {
    throw IngestionError(path.string() + " is not a binary (P5) PGM");
  }
  GrayImage img;
  long maxval = 0;
  try {
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    maxval = std::stol(next_token());
  } catch (const std::exception&) {
    throw IngestionError(path.string() + " has a malformed PGM header");
  }
  if (maxval <= 0 || maxval > 255) {
    throw IngestionError(path.string() + " is not an 8-bit PGM");
  }
  if (img.width < kPatchSide || img.height < kPatchSide) {
    throw IngestionError(path.string() + " is smaller than 32x32");
  }
  std::vector<unsigned char> raw(img.width * img.height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IngestionError(path.string() + " is truncated");
  }
  img.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.pixels[i] = static_cast<double>(raw[i]) / static_cast<double>(maxval);
  }
  return img;
}

void write_pgm(const fs::path& path, std::size_t width, std::size_t height,
               std::span<const double> pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> raw(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(pixels[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Patch to_patch(const GrayImage& image) {
  const std::size_t side = std::min(image.width, image.height);
  const std::size_t x0 = (image.width - side) / 2;
  const std::size_t y0 = (image.height - side) / 2;
  Patch patch(kPatchPixels, 0.0);
  // Area-weighted downscale of the centered side x side square.
  const double scale = static_cast<double>(side) / kPatchSide;
  for (std::size_t py = 0; py < kPatchSide; ++py) {
    const double sy0 = py * scale;
    const double sy1 = sy0 + scale;
    for (std::size_t px = 0; px < kPatchSide; ++px) {
      const double sx0 = px * scale;
      const double sx1 = sx0 + scale;
      double sum = 0.0;
      for (auto y = static_cast<std::size_t>(sy0);
           y < static_cast<std::size_t>(std::ceil(sy1)) && y < side; ++y) {
        const double wy = std::min<double>(y + 1, sy1) - std::max<double>(y, sy0);
        if (wy <= 0.0) continue;
        for (auto x = static_cast<std::size_t>(sx0);
             x < static_cast<std::size_t>(std::ceil(sx1)) && x < side; ++x) {
          const double wx =
              std::min<double>(x + 1, sx1) - std::max<double>(x, sx0);
          if (wx <= 0.0) continue;
          sum += wx * wy * image.pixels[(y0 + y) * image.width + (x0 + x)];
        }
      }
      patch[py * kPatchSide + px] = sum / (scale * scale);
    }
  }
  return patch;
}

TaskDataset load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IngestionError("task directory " + dir.string() + " does not exist");
  }
  TaskDataset task;
  task.name = dir.filename().string();
  if (task.name.empty()) task.name = dir.parent_path().filename().string();
  task.provenance = "external";
  const std::pair<const char*, nn::LabeledSet*> splits[] = {
      {"train", &task.train}, {"val", &task.val}, {"test", &task.test}};
  for (const auto& [split, set] : splits) {
    const fs::path split_dir = dir / split;
    if (!fs::is_directory(split_dir)) {
      throw IngestionError("missing split directory " + split_dir.string());
    }
    set->width = kPatchPixels;
    load_class_dir(split_dir / "real", 0, *set);
    load_class_dir(split_dir / "fake", 1, *set);
  }
  return task;
}

void write_directory(const TaskDataset& task, const fs::path& dir) {
  const std::pair<const char*, const nn::LabeledSet*> splits[] = {
      {"train", &task.train}, {"val", &task.val}, {"test", &task.test}};
  for (const auto& [split, set] : splits) {
    std::size_t counter[2] = {0, 0};
    for (const char* cls : {"real", "fake"}) {
      fs::create_directories(dir / split / cls);
    }
    for (std::size_t i = 0; i < set->size(); ++i) {
      const int label = set->labels[i];
      char name[32];
      std::snprintf(name, sizeof(name), "%05zu.pgm", counter[label]++);
      write_pgm(dir / split / (label == 0 ? "real" : "fake") / name, kPatchSide,
                kPatchSide, set->row(i));
    }
  }
}

}  // namespace clfake::taskgen
