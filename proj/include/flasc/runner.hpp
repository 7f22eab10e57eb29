// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_RUNNER_HPP
#define FLASC_RUNNER_HPP

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flasc/config.hpp"
#include "flasc/round.hpp"

namespace flasc {

// One evaluation point. Round 0 is the pre-training baseline. Cumulative
// columns are param counts (plus bytes in byte-exact mode); time_units is the
// modeled transfer time of everything communicated so far. wall_ms is kept in
// memory only: the metrics CSV must replay byte-identically.
struct MetricsRow {
  std::uint64_t round = 0;
  std::uint64_t seed = 0;
  std::string strategy;
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t down_params_cum = 0;
  std::size_t up_params_cum = 0;
  std::size_t down_bytes_cum = 0;
  std::size_t up_bytes_cum = 0;
  double time_units = 0.0;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  ExperimentConfig cfg;
  std::vector<MetricsRow> rows;
  FlatParams final_params;
  Backbone merged;  // backbone with the final adapter folded in
  CommLedger ledger;
  double wall_ms = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_metrics_csv(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<MetricsRow>& rows,
                       const std::string& tags = "");

// Runs and writes every output file (metrics CSV, final params, merged
// backbone, optional task/partition dumps). Paths are resolved against the
// FLASC_OUT_DIR environment variable when it is set.
ExperimentResult run_experiment_to_files(const ExperimentConfig& cfg);

std::string resolve_out_path(const std::string& out);

// --- sweeps ---------------------------------------------------------------

struct SweepPoint {
  std::map<std::string, std::string> grid;  // swept key -> value
  std::string tags;                         // "k=v;k=v" in sorted key order
  bool ok = false;
  std::string error;
  std::optional<ExperimentResult> result;
};

// Gridspec = ordinary config plus sweep.<key>=v1,v2,... axes. One run per
// Cartesian grid point; failures are recorded and the sweep continues.
std::vector<SweepPoint> run_sweep(const std::string& gridspec_text);

// --- plot data ------------------------------------------------------------

struct ParsedMetrics {
  std::map<std::string, std::string> config;  // echoed header
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string tags;  // from a sweep-concatenated file, may be empty

  double number(std::size_t row, const std::string& column) const;
};

ParsedMetrics read_metrics_csv(std::istream& is);

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  std::string series;
  std::uint64_t seed = 0;
};

// Long-form (x, y, series, seed) rows for the named axes. x is one of round,
// down_params_cum, up_params_cum, comm_params_cum, time_units (plus the bytes
// columns when present); y is accuracy or loss.
std::vector<PlotPoint> emit_plotdata(const std::vector<ParsedMetrics>& metrics,
                                     const std::string& x_axis,
                                     const std::string& y_axis);

struct BandPoint {
  double x = 0.0;
  std::string series;
  double y_min = 0.0;
  double y_mean = 0.0;
  double y_max = 0.0;
};

// min/mean/max over seeds per (series, x), for band plots.
std::vector<BandPoint> plot_bands(const std::vector<PlotPoint>& points);

void write_plotdata_csv(std::ostream& os, const std::vector<PlotPoint>& points);
void write_bands_csv(std::ostream& os, const std::vector<BandPoint>& bands);

}  // namespace flasc

#endif  // FLASC_RUNNER_HPP
