// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flasc/config.hpp"
#include "flasc/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw flasc::ConfigError("cannot read file: " + path);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path) {
  const flasc::ExperimentConfig cfg = flasc::parse_config(read_file(config_path));
  const flasc::ExperimentResult res = flasc::run_experiment_to_files(cfg);
  std::cout << "wrote " << flasc::resolve_out_path(cfg.out) << " ("
            << res.rows.size() << " eval rows, final accuracy "
            << res.rows.back().accuracy << ", " << res.wall_ms / 1e3
            << "s wall)\n";
  return kExitOk;
}

int cmd_sweep(const std::string& gridspec_path) {
  const std::string text = read_file(gridspec_path);
  const auto points = flasc::run_sweep(text);

  // Per-point metrics files plus one concatenated file with a tags column.
  const flasc::ExperimentConfig probe = [&] {
    for (const auto& p : points) {
      if (p.ok) return p.result->cfg;
    }
    throw std::runtime_error("sweep: every grid point failed");
  }();
  const std::string out = flasc::resolve_out_path(probe.out);
  const std::string stem = out.substr(0, out.rfind('.') == std::string::npos
                                             ? out.size()
                                             : out.rfind('.'));
  std::ofstream concat(stem + ".sweep.csv");
  if (!concat) {
    throw std::runtime_error("cannot open output file: " + stem + ".sweep.csv");
  }
  std::string concat_header;
  int failures = 0;
  int skipped = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!p.ok) {
      ++failures;
      continue;
    }
    const std::string pt_path = stem + ".pt" + std::to_string(i) + ".csv";
    std::ofstream f(pt_path);
    flasc::write_metrics_csv(f, p.result->cfg, p.result->rows);
    // Concatenated long form: emit rows once under a shared header. Points
    // whose column set differs (e.g. a swept size.mode) keep their per-point
    // file but stay out of the concatenation.
    std::stringstream one;
    flasc::write_metrics_csv(one, p.result->cfg, p.result->rows,
                             p.tags.empty() ? "-" : p.tags);
    std::string line;
    bool past_header = false;
    bool include = true;
    while (std::getline(one, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!past_header) {
        past_header = true;
        if (concat_header.empty()) {
          concat_header = line;
          concat << line << '\n';
        } else if (line != concat_header) {
          include = false;
          ++skipped;
          std::cout << "  point " << i << " [" << p.tags
                    << "] has a different column set; left out of the "
                       "concatenated file\n";
        }
        continue;
      }
      if (include) concat << line << '\n';
    }
  }

  std::cout << "sweep: " << points.size() << " points, " << failures
            << " failed\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].ok) {
      std::cout << "  point " << i << " [" << points[i].tags
                << "] failed: " << points[i].error << "\n";
    }
  }
  if (failures == static_cast<int>(points.size())) return kExitRuntime;
  return failures > 0 ? kExitRuntime : kExitOk;
}

int cmd_plotdata(const std::vector<std::string>& metrics_paths,
                 const std::string& x_axis, const std::string& y_axis,
                 bool bands, const std::string& out_path) {
  std::vector<flasc::ParsedMetrics> parsed;
  for (const auto& path : metrics_paths) {
    std::ifstream f(path);
    if (!f) {
      throw std::runtime_error("cannot read metrics file: " + path);
    }
    parsed.push_back(flasc::read_metrics_csv(f));
  }
  const auto points = flasc::emit_plotdata(parsed, x_axis, y_axis);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      throw std::runtime_error("cannot open output file: " + out_path);
    }
    os = &file;
  }
  if (bands) {
    flasc::write_bands_csv(*os, flasc::plot_bands(points));
  } else {
    flasc::write_plotdata_csv(*os, points);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flasc-sim: federated LoRA fine-tuning simulator with sparse "
               "communication"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "key=value config file")->required();

  std::string gridspec_path;
  auto* sweep = app.add_subcommand("sweep", "run a grid of experiments");
  sweep->add_option("gridspec", gridspec_path,
                    "config file with sweep.<key>=v1,v2,... axes")
      ->required();

  std::vector<std::string> metrics_paths;
  std::string x_axis = "round";
  std::string y_axis = "accuracy";
  std::string plot_out;
  bool bands = false;
  auto* plotdata =
      app.add_subcommand("plotdata", "reshape metrics CSVs into plot data");
  plotdata->add_option("metrics", metrics_paths, "metrics CSV files")
      ->required();
  plotdata->add_option("--x", x_axis,
                       "x axis: round, down_params_cum, up_params_cum, "
                       "comm_params_cum, time_units");
  plotdata->add_option("--y", y_axis, "y axis: accuracy or loss");
  plotdata->add_option("--out", plot_out, "output file (default: stdout)");
  plotdata->add_flag("--bands", bands, "emit min/mean/max over seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (sweep->parsed()) return cmd_sweep(gridspec_path);
    if (plotdata->parsed()) {
      return cmd_plotdata(metrics_paths, x_axis, y_axis, bands, plot_out);
    }
  } catch (const flasc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
