// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// clfake command-line front end. Talks to the engine only through the C API.
// Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clfake/clfake.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(clf_status s) {
  switch (s) {
    case CLF_ERR_INVALID_ARGUMENT:
    case CLF_ERR_CONFIG:
    case CLF_ERR_DOMAIN:
    case CLF_ERR_INGESTION:
    case CLF_ERR_NOT_FOUND:
    case CLF_ERR_VALIDATION:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

void check(clf_status s) {
  if (s != CLF_OK) {
    throw Failure{exit_code_for(s),
                  std::string(clf_status_name(s)) + ": " + clf_last_error()};
  }
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using Manifest = std::unique_ptr<clf_manifest, Deleter<clf_manifest, clf_manifest_destroy>>;
using Model = std::unique_ptr<clf_model, Deleter<clf_model, clf_model_destroy>>;
using Task = std::unique_ptr<clf_task, Deleter<clf_task, clf_task_destroy>>;
using Experiment =
    std::unique_ptr<clf_experiment, Deleter<clf_experiment, clf_experiment_destroy>>;
using Registry = std::unique_ptr<clf_registry, Deleter<clf_registry, clf_registry_destroy>>;

json take_json(char* s) {
  json j = json::parse(s);
  clf_string_free(s);
  return j;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitUsage, "cannot read " + path.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Failure{kExitUsage, path.string() + " is not valid JSON: " + e.what()};
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw Failure{kExitRuntime, "cannot write " + path.string()};
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitRuntime, "cannot create " + dir.string()};
}

// Options shared by the subcommands that load tasks and train.
struct Common {
  std::uint64_t seed = 1;
  std::string out = "clfake-out";
  std::string preset;
  std::string manifest;
  std::uint64_t data_seed = 7;

  std::optional<std::string> run_config;
  std::optional<int> epochs, patience, batch_size, crop_size;
  std::optional<double> lr, lr_min, momentum;

  std::string strategy;
  std::optional<double> alpha, beta, tau, lambda;
  std::optional<int> fisher_samples;
  std::optional<std::string> accumulation;
  bool tau_squared = false;
};

// Defaults that differ per subcommand are filled in after parsing.
void add_data_options(CLI::App* cmd, Common& c, const std::string& default_preset) {
  auto* preset = cmd->add_option("--preset", c.preset,
                                 "easy_like or long_like (default " + default_preset + ")")
                     ->check(CLI::IsMember({"easy_like", "long_like"}));
  cmd->add_option("--manifest", c.manifest, "task manifest JSON")
      ->check(CLI::ExistingFile)
      ->excludes(preset);
  cmd->add_option("--data-seed", c.data_seed, "seed of the synthetic task data")
      ->capture_default_str();
}

void add_run_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--run-config", c.run_config, "JSON file mirroring RunConfig")
      ->check(CLI::ExistingFile);
  cmd->add_option("--epochs", c.epochs, "epoch budget (default 250)");
  cmd->add_option("--patience", c.patience, "early-stopping patience (default 35)");
  cmd->add_option("--batch-size", c.batch_size, "mini-batch size (default 64)");
  cmd->add_option("--lr", c.lr, "initial learning rate (default 0.005)");
  cmd->add_option("--lr-min", c.lr_min, "cosine floor (default 1e-5)");
  cmd->add_option("--momentum", c.momentum, "SGD momentum (default 0.1)");
  cmd->add_option("--crop", c.crop_size, "random/center crop size; off by default");
}

void add_strategy_options(CLI::App* cmd, Common& c, const std::string& fallback) {
  cmd->add_option("--strategy", c.strategy, "transfer, kd or ewc (default " + fallback + ")")
      ->check(CLI::IsMember({"transfer", "kd", "ewc"}));
  cmd->add_option("--alpha", c.alpha, "KD distillation weight (default 1)");
  cmd->add_option("--beta", c.beta, "KD label weight (default 1)");
  cmd->add_option("--tau", c.tau, "KD temperature (default 2)");
  cmd->add_flag("--tau-squared", c.tau_squared, "scale the KD distillation term by tau^2");
  cmd->add_option("--lambda", c.lambda, "EWC strength (default 1000)");
  cmd->add_option("--fisher-samples", c.fisher_samples, "EWC Fisher samples (default 200)");
  cmd->add_option("--accumulation", c.accumulation, "per_task_list or running_sum")
      ->check(CLI::IsMember({"per_task_list", "running_sum"}));
}

json run_json(const Common& c) {
  json j = c.run_config ? read_json(*c.run_config) : json::object();
  if (!j.is_object()) throw Failure{kExitUsage, "run config must be a JSON object"};
  if (c.epochs) j["max_epochs"] = *c.epochs;
  if (c.patience) j["patience"] = *c.patience;
  if (c.batch_size) j["batch_size"] = *c.batch_size;
  if (c.lr) j["lr_initial"] = *c.lr;
  if (c.lr_min) j["lr_min"] = *c.lr_min;
  if (c.momentum) j["momentum"] = *c.momentum;
  if (c.crop_size) j["crop"] = {{"enabled", true}, {"size", *c.crop_size}};
  if (!c.run_config || !j.contains("seed")) j["seed"] = c.seed;
  return j;
}

// With `strict`, coefficient flags of another strategy are an error;
// otherwise they are dropped (several strategies in one invocation).
json strategy_json(const Common& c, bool strict = true) {
  json j = {{"name", c.strategy}};
  const bool kd = c.strategy == "kd";
  const bool ewc = c.strategy == "ewc";
  auto misplaced = [&](bool given, const char* flag, const char* owner) {
    if (given && strict) {
      throw Failure{kExitUsage, std::string(flag) + " only applies to --strategy " + owner};
    }
  };
  if (!kd) {
    misplaced(c.alpha.has_value(), "--alpha", "kd");
    misplaced(c.beta.has_value(), "--beta", "kd");
    misplaced(c.tau.has_value(), "--tau", "kd");
    misplaced(c.tau_squared, "--tau-squared", "kd");
  }
  if (!ewc) {
    misplaced(c.lambda.has_value(), "--lambda", "ewc");
    misplaced(c.fisher_samples.has_value(), "--fisher-samples", "ewc");
    misplaced(c.accumulation.has_value(), "--accumulation", "ewc");
  }
  if (kd) {
    if (c.alpha) j["alpha"] = *c.alpha;
    if (c.beta) j["beta"] = *c.beta;
    if (c.tau) j["tau"] = *c.tau;
    if (c.tau_squared) j["scale_by_tau_squared"] = true;
  }
  if (ewc) {
    if (c.lambda) j["lambda"] = *c.lambda;
    if (c.fisher_samples) j["fisher_sample_count"] = *c.fisher_samples;
    if (c.accumulation) j["accumulation"] = *c.accumulation;
  }
  return j;
}

Manifest load_manifest(const Common& c) {
  clf_manifest* m = nullptr;
  if (!c.manifest.empty()) {
    check(clf_manifest_load(c.manifest.c_str(), &m));
  } else {
    check(clf_manifest_preset(c.preset.c_str(), c.data_seed, &m));
  }
  return Manifest(m);
}

json manifest_json(const clf_manifest* m) {
  char* text = nullptr;
  check(clf_manifest_to_json(m, &text));
  return take_json(text);
}

// Reproducibility echo written next to every run's outputs.
void write_invocation(const fs::path& out, const std::vector<std::string>& argv,
                      const json& extra) {
  json j = {{"argv", argv}, {"version", clf_version()}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text(out / "invocation.json", j.dump(2) + "\n");
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// ---- subcommands ------------------------------------------------------------

void cmd_gen_tasks(const Common& c, const std::vector<std::string>& argv) {
  auto m = load_manifest(c);
  const fs::path out(c.out);
  make_dir(out);
  check(clf_manifest_write_tasks(m.get(), out.string().c_str()));
  write_invocation(out, argv, {{"manifest", manifest_json(m.get())}});
  std::cout << "wrote tasks and manifest.json to " << out.string() << "\n";
}

void cmd_train(const Common& c, const std::string& task_name,
               const std::string& data_dir, const std::string& init_path,
               const std::vector<std::string>& argv) {
  const auto run = run_json(c).dump();
  const auto strategy = strategy_json(c).dump();
  Manifest m;
  clf_task* t = nullptr;
  if (!data_dir.empty()) {
    check(clf_task_load_directory(data_dir.c_str(), &t));
  } else {
    m = load_manifest(c);
    check(clf_task_from_manifest(m.get(), task_name.c_str(), &t));
  }
  Task task(t);

  Model init;
  if (!init_path.empty()) {
    clf_model* im = nullptr;
    check(clf_model_load(init_path.c_str(), &im));
    init.reset(im);
  } else if (c.strategy != "transfer") {
    throw Failure{kExitUsage, "--strategy " + c.strategy + " needs --init (a model to continue from)"};
  }
  clf_model* trained = nullptr;
  check(clf_train(init.get(), task.get(), strategy.c_str(), run.c_str(), &trained));
  Model model(trained);

  double acc = 0.0;
  check(clf_evaluate(model.get(), task.get(), &acc));
  const fs::path out(c.out);
  make_dir(out);
  check(clf_model_save(model.get(), (out / "model.ckpt").string().c_str()));
  char* info = nullptr;
  check(clf_model_info(model.get(), &info));
  json result = {{"test_accuracy", acc}, {"model", take_json(info)}};
  write_text(out / "train.json", result.dump(2) + "\n");
  json extra = {{"run", json::parse(run)}, {"strategy", json::parse(strategy)}};
  if (m) extra["manifest"] = manifest_json(m.get());
  write_invocation(out, argv, extra);
  std::printf("test accuracy %.4f; model written to %s\n", acc,
              (out / "model.ckpt").string().c_str());
}

void cmd_zero_shot(const Common& c, const std::string& train_task,
                   const std::vector<std::string>& argv) {
  auto m = load_manifest(c);
  const auto run = run_json(c).dump();
  char* text = nullptr;
  check(clf_zero_shot(m.get(), train_task.c_str(), run.c_str(), &text));
  const json result = take_json(text);

  const fs::path out(c.out);
  make_dir(out);
  std::string csv = "task,family,accuracy\n";
  for (const auto& t : result.at("tasks")) {
    csv += t.at("name").get<std::string>() + "," + t.at("family").get<std::string>() +
           "," + csv_number(t.at("accuracy").get<double>()) + "\n";
    std::printf("%-16s %-13s %.4f\n", t.at("name").get<std::string>().c_str(),
                t.at("family").get<std::string>().c_str(), t.at("accuracy").get<double>());
  }
  write_text(out / "zero_shot.csv", csv);
  write_text(out / "zero_shot.json", result.dump(2) + "\n");
  write_invocation(out, argv,
                   {{"run", json::parse(run)}, {"manifest", manifest_json(m.get())}});
}

void run_sequences(const Common& c, const std::vector<std::string>& strategies,
                   const json& options, const std::vector<std::string>& argv) {
  auto m = load_manifest(c);
  const auto run = run_json(c).dump();
  const auto opts = options.dump();
  std::vector<Experiment> runs;
  json strategy_list = json::array();
  for (const auto& name : strategies) {
    Common sc = c;
    sc.strategy = name;
    const auto strategy = strategy_json(sc, strategies.size() == 1).dump();
    strategy_list.push_back(json::parse(strategy));
    clf_experiment* e = nullptr;
    check(clf_experiment_run(m.get(), strategy.c_str(), run.c_str(), opts.c_str(), &e));
    runs.emplace_back(e);
    double avg = 0.0;
    check(clf_experiment_final_average(e, &avg));
    std::printf("%-8s final average accuracy %.4f\n", name.c_str(), avg);
  }
  const fs::path out(c.out);
  make_dir(out);
  std::vector<const clf_experiment*> ptrs;
  for (const auto& r : runs) ptrs.push_back(r.get());
  check(clf_report_write(ptrs.data(), ptrs.size(), out.string().c_str(), nullptr));
  write_invocation(out, argv,
                   {{"run", json::parse(run)},
                    {"strategies", strategy_list},
                    {"options", options},
                    {"manifest", manifest_json(m.get())}});
  std::cout << "report written to " << out.string() << "\n";
}

void cmd_pipeline(const Common& c, const std::string& scenario_path,
                  double threshold, std::size_t window, bool approval,
                  const std::string& registry_dir, const std::vector<std::string>& argv) {
  auto m = load_manifest(c);
  const json scenario = read_json(scenario_path);
  json config = {{"strategy", strategy_json(c)},
                 {"run", run_json(c)},
                 {"drift_threshold", threshold},
                 {"window_size", window},
                 {"approval_mode", approval}};
  const fs::path out(c.out);
  make_dir(out);
  const fs::path reg_dir = registry_dir.empty() ? out / "registry" : fs::path(registry_dir);
  if (fs::exists(reg_dir / "index.json")) {
    throw Failure{kExitUsage, "registry " + reg_dir.string() + " already exists"};
  }
  clf_registry* r = nullptr;
  check(clf_registry_open(reg_dir.string().c_str(), &r));
  Registry registry(r);

  const auto log_path = (out / "events.jsonl").string();
  char* text = nullptr;
  check(clf_scenario_run(m.get(), scenario.dump().c_str(), config.dump().c_str(),
                         registry.get(), c.seed, log_path.c_str(), &text));
  const json result = take_json(text);
  write_text(out / "scenario_result.json", result.dump(2) + "\n");
  write_invocation(out, argv,
                   {{"scenario", scenario},
                    {"config", config},
                    {"seed", c.seed},
                    {"manifest", manifest_json(m.get())}});
  for (const auto& p : result.at("phases")) {
    std::printf("%-16s before %.4f after %.4f\n",
                p.at("generator").get<std::string>().c_str(),
                p.at("before").get<double>(), p.at("after").get<double>());
  }
  std::printf("retrains %zu, active version %llu\n", result.at("retrains").size(),
              static_cast<unsigned long long>(result.at("final_version").get<std::uint64_t>()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning fake-media detector: task generation, "
               "experiments and a simulated deployment pipeline."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(clf_version()));

  Common c;
  app.add_option("--seed", c.seed, "run seed")->capture_default_str();
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  const std::vector<std::string> args(argv, argv + argc);

  auto* gen = app.add_subcommand("gen-tasks", "materialise a task manifest as PGM directories");
  add_data_options(gen, c, "easy_like");
  gen->fallthrough();

  std::string task_name = "gaugan", data_dir, init_path;
  auto* train = app.add_subcommand("train", "train one task, optionally continuing a model");
  add_data_options(train, c, "easy_like");
  add_run_options(train, c);
  add_strategy_options(train, c, "transfer");
  auto* task_opt = train->add_option("--task", task_name, "task name from the manifest")
                       ->capture_default_str();
  train->add_option("--data", data_dir, "PGM task directory to ingest instead")
      ->check(CLI::ExistingDirectory)
      ->excludes(task_opt);
  train->add_option("--init", init_path, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  train->fallthrough();

  std::string zs_task = "gaugan";
  auto* zero = app.add_subcommand("zero-shot", "train on one task, score every task");
  add_data_options(zero, c, "easy_like");
  add_run_options(zero, c);
  zero->add_option("--train-task", zs_task, "task to train on")->capture_default_str();
  zero->fallthrough();

  std::vector<std::string> seq_strategies;
  std::size_t seq_group = 0;
  auto* seq = app.add_subcommand("sequence", "continual run over a task sequence");
  add_data_options(seq, c, "easy_like");
  add_run_options(seq, c);
  add_strategy_options(seq, c, "transfer");
  seq->add_option("--compare", seq_strategies,
                  "additional strategies reported alongside --strategy")
      ->check(CLI::IsMember({"transfer", "kd", "ewc"}));
  seq->add_option("--group-size", seq_group, "merge consecutive tasks (0: none)")
      ->capture_default_str();
  seq->fallthrough();

  std::size_t mt_group = 3;
  std::string mt_mode = "paper_order";
  auto* multi = app.add_subcommand("multitask", "grouped continual run");
  add_data_options(multi, c, "long_like");
  add_run_options(multi, c);
  add_strategy_options(multi, c, "kd");
  multi->add_option("--group-size", mt_group, "tasks per group")->capture_default_str();
  multi->add_option("--mode", mt_mode, "paper_order or greedy")
      ->check(CLI::IsMember({"paper_order", "greedy"}))
      ->capture_default_str();
  multi->fallthrough();

  std::string scenario_path, registry_dir;
  double drift_threshold = 0.25;
  std::size_t window_size = 200;
  bool approval = false;
  auto* pipe = app.add_subcommand("pipeline", "run a deployment scenario");
  add_data_options(pipe, c, "easy_like");
  add_run_options(pipe, c);
  add_strategy_options(pipe, c, "kd");
  pipe->add_option("--scenario", scenario_path, "scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  pipe->add_option("--drift-threshold", drift_threshold, "KS alert threshold")
      ->capture_default_str();
  pipe->add_option("--window-size", window_size, "monitoring window")->capture_default_str();
  pipe->add_flag("--approval", approval, "retrained models wait for approval");
  pipe->add_option("--registry", registry_dir, "registry directory (default <out>/registry)");
  pipe->fallthrough();

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "regenerate SVG and table from CSVs");
  rep->add_option("--in", report_dir, "report directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (c.preset.empty()) c.preset = *multi ? "long_like" : "easy_like";
  if (c.strategy.empty()) c.strategy = (*multi || *pipe) ? "kd" : "transfer";

  try {
    if (*gen) {
      cmd_gen_tasks(c, args);
    } else if (*train) {
      cmd_train(c, task_name, data_dir, init_path, args);
    } else if (*zero) {
      cmd_zero_shot(c, zs_task, args);
    } else if (*seq) {
      std::vector<std::string> all{c.strategy};
      for (const auto& s : seq_strategies) {
        if (std::find(all.begin(), all.end(), s) == all.end()) all.push_back(s);
      }
      json options = json::object();
      if (seq_group > 0) options["group_size"] = seq_group;
      run_sequences(c, all, options, args);
    } else if (*multi) {
      if (mt_group == 0) throw Failure{kExitUsage, "--group-size must be positive"};
      run_sequences(c, {c.strategy},
                    {{"group_size", mt_group}, {"group_mode", mt_mode}}, args);
    } else if (*pipe) {
      cmd_pipeline(c, scenario_path, drift_threshold, window_size, approval,
                   registry_dir, args);
    } else if (*rep) {
      check(clf_report_regenerate(report_dir.c_str()));
      std::cout << "regenerated curves.svg and table.md in " << report_dir << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "clfake: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "clfake: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
