// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace clfake::report {
namespace fs = std::filesystem;
namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  if (rows.empty()) throw IngestionError(path.string() + " is empty");
  return rows;
}

double parse_number(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IngestionError(path.string() + ": '" + s + "' is not a number");
  }
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s = buf;
  if (s == "-0.000000" || (s.size() > 1 && s[0] == '-' &&
                           s.find_first_not_of("-0.") == std::string::npos)) {
    s.erase(0, 1);
  }
  return s;
}

std::string eval_matrix_csv(const std::vector<harness::ExperimentResult>& results) {
  if (results.empty()) throw ConfigError("no results to report");
  std::string out = "strategy,stage";
  for (const auto& name : results.front().matrix.task_names) out += "," + name;
  out += "\n";
  for (const auto& r : results) {
    if (r.matrix.task_names != results.front().matrix.task_names) {
      throw ConfigError("reported runs must share their evaluation tasks");
    }
    for (std::size_t i = 0; i < r.matrix.rows.size(); ++i) {
      out += r.strategy + "," + r.matrix.stage_names.at(i);
      for (double a : r.matrix.rows[i]) out += "," + format_fixed(a);
      out += "\n";
    }
  }
  return out;
}

std::string curves_csv(const std::vector<harness::ExperimentResult>& results) {
  std::string out = "strategy,stage,seen,average_accuracy\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
      out += r.strategy + "," + r.matrix.stage_names.at(i) + "," +
             std::to_string(r.matrix.seen(i)) + "," + format_fixed(r.curve[i]) +
             "\n";
    }
  }
  return out;
}

nlohmann::json summary(const std::vector<harness::ExperimentResult>& results) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : results) {
    std::vector<double> pct;
    for (double a : r.matrix.rows.back()) {
      pct.push_back(harness::round_half_away(100.0 * a, 2));
    }
    nlohmann::json best_epochs = nlohmann::json::array();
    for (const auto& c : r.checkpoints) best_epochs.push_back(c.trace.best_epoch);
    runs.push_back({{"strategy", r.strategy},
                    {"stages", r.matrix.stage_names},
                    {"final_average_accuracy", r.final_average},
                    {"final_accuracy_percent", pct},
                    {"average_percent", harness::row_average(pct)},
                    {"curve", r.curve},
                    {"forgetting",
                     {{"per_task", r.forgetting.per_task},
                      {"mean", r.forgetting.mean}}},
                    {"best_epochs", best_epochs}});
  }
  return {{"tasks", results.front().matrix.task_names}, {"runs", runs}};
}

void emit_report(const std::vector<harness::ExperimentResult>& results,
                 const fs::path& out_dir, const nlohmann::json& context) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string());
  }
  write_file(out_dir / "eval_matrix.csv", eval_matrix_csv(results));
  write_file(out_dir / "curves.csv", curves_csv(results));
  auto s = summary(results);
  s["context"] = context;
  write_file(out_dir / "summary.json", s.dump(2) + "\n");
  regenerate(out_dir);
}

std::vector<StrategyCurves> read_curves(const fs::path& dir) {
  const auto matrix_path = dir / "eval_matrix.csv";
  const auto curves_path = dir / "curves.csv";
  const auto matrix = parse_csv(read_file(matrix_path), matrix_path);
  const auto curves = parse_csv(read_file(curves_path), curves_path);
  const auto& header = matrix.front();
  if (header.size() < 3 || header[0] != "strategy" || header[1] != "stage") {
    throw IngestionError(matrix_path.string() + " has an unexpected header");
  }
  if (curves.front() !=
      std::vector<std::string>{"strategy", "stage", "seen", "average_accuracy"}) {
    throw IngestionError(curves_path.string() + " has an unexpected header");
  }
  std::vector<StrategyCurves> out;
  std::map<std::string, std::size_t> index;
  auto entry = [&](const std::string& name) -> StrategyCurves& {
    auto it = index.find(name);
    if (it == index.end()) {
      index[name] = out.size();
      out.push_back({});
      out.back().strategy = name;
      out.back().task_names.assign(header.begin() + 2, header.end());
      return out.back();
    }
    return out[it->second];
  };
  for (std::size_t i = 1; i < curves.size(); ++i) {
    const auto& row = curves[i];
    if (row.size() != 4) {
      throw IngestionError(curves_path.string() + " line " +
                           std::to_string(i + 1) + " has " +
                           std::to_string(row.size()) + " fields");
    }
    auto& c = entry(row[0]);
    c.stage_names.push_back(row[1]);
    c.seen.push_back(static_cast<std::size_t>(parse_number(row[2], curves_path)));
    c.curve.push_back(parse_number(row[3], curves_path));
  }
  for (std::size_t i = 1; i < matrix.size(); ++i) {
    const auto& row = matrix[i];
    if (row.size() != header.size()) {
      throw IngestionError(matrix_path.string() + " line " +
                           std::to_string(i + 1) + " is ragged");
    }
    auto& c = entry(row[0]);
    c.final_row.clear();
    for (std::size_t j = 2; j < row.size(); ++j) {
      c.final_row.push_back(parse_number(row[j], matrix_path));
    }
  }
  return out;
}

std::string render_svg(const std::vector<StrategyCurves>& curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  const double w = 640, h = 400, left = 60, right = 150, top = 20, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;
  std::size_t stages = 1;
  for (const auto& c : curves) stages = std::max(stages, c.curve.size());
  auto x_of = [&](std::size_t i) {
    return stages == 1 ? left + pw / 2
                       : left + pw * static_cast<double>(i) /
                                    static_cast<double>(stages - 1);
  };
  auto y_of = [&](double acc) { return top + ph * (1.0 - acc); };

  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
      "viewBox=\"0 0 640 400\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  for (int k = 0; k <= 10; k += 2) {
    const double y = y_of(k / 10.0);
    s += "<line x1=\"" + format_fixed(left, 1) + "\" y1=\"" + format_fixed(y, 1) +
         "\" x2=\"" + format_fixed(left + pw, 1) + "\" y2=\"" +
         format_fixed(y, 1) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + format_fixed(left - 8, 1) + "\" y=\"" +
         format_fixed(y + 4, 1) + "\" text-anchor=\"end\">" +
         format_fixed(k / 10.0, 1) + "</text>\n";
  }
  s += "<line x1=\"" + format_fixed(left, 1) + "\" y1=\"" +
       format_fixed(top + ph, 1) + "\" x2=\"" + format_fixed(left + pw, 1) +
       "\" y2=\"" + format_fixed(top + ph, 1) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + format_fixed(left, 1) + "\" y1=\"" + format_fixed(top, 1) +
       "\" x2=\"" + format_fixed(left, 1) + "\" y2=\"" +
       format_fixed(top + ph, 1) + "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < stages; ++i) {
    s += "<text x=\"" + format_fixed(x_of(i), 1) + "\" y=\"" +
         format_fixed(top + ph + 16, 1) + "\" text-anchor=\"middle\">" +
         std::to_string(i + 1) + "</text>\n";
  }
  s += "<text x=\"" + format_fixed(left + pw / 2, 1) + "\" y=\"" +
       format_fixed(h - 20, 1) +
       "\" text-anchor=\"middle\">stage</text>\n";
  s += "<text x=\"16\" y=\"" + format_fixed(top + ph / 2, 1) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       format_fixed(top + ph / 2, 1) + ")\">average accuracy</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < curves[k].curve.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += format_fixed(x_of(i), 1) + "," +
             format_fixed(y_of(curves[k].curve[i]), 1);
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    s += "<line x1=\"" + format_fixed(left + pw + 15, 1) + "\" y1=\"" +
         format_fixed(ly, 1) + "\" x2=\"" + format_fixed(left + pw + 35, 1) +
         "\" y2=\"" + format_fixed(ly, 1) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + format_fixed(left + pw + 40, 1) + "\" y=\"" +
         format_fixed(ly + 4, 1) + "\">" + xml_escape(curves[k].strategy) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render_table(const std::vector<StrategyCurves>& curves) {
  if (curves.empty()) return "";
  const auto& tasks = curves.front().task_names;
  std::vector<std::vector<double>> pct;
  for (const auto& c : curves) {
    std::vector<double> row;
    for (double a : c.final_row) row.push_back(harness::round_half_away(100.0 * a, 2));
    row.push_back(harness::row_average(row));
    pct.push_back(std::move(row));
  }
  std::string s = "| strategy |";
  for (const auto& t : tasks) s += " " + t + " |";
  s += " average |\n|---|";
  for (std::size_t j = 0; j <= tasks.size(); ++j) s += "---:|";
  s += "\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    s += "| " + curves[k].strategy + " |";
    for (std::size_t j = 0; j < pct[k].size(); ++j) {
      double best = pct[0][j];
      for (const auto& row : pct) best = std::max(best, row[j]);
      const std::string v = format_fixed(pct[k][j], 2);
      s += (curves.size() > 1 && pct[k][j] == best) ? " **" + v + "** |"
                                                     : " " + v + " |";
    }
    s += "\n";
  }
  return s;
}

void regenerate(const fs::path& dir) {
  const auto curves = read_curves(dir);
  write_file(dir / "curves.svg", render_svg(curves));
  write_file(dir / "table.md", render_table(curves));
}

}  // namespace clfake::report
