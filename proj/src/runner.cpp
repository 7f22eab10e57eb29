// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flasc {

namespace {

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();

  RngStream task_stream(cfg.seed, {StreamPurpose::kTaskGen});
  const TaskPair task = gen_task_pair(cfg.task, task_stream);

  RngStream pretrain_stream(cfg.seed, {StreamPurpose::kPretrain});
  const Backbone backbone = train_centralized(
      task.source, cfg.pretrain.hidden, cfg.task.n_classes, cfg.pretrain,
      pretrain_stream);

  RngStream partition_stream(cfg.seed, {StreamPurpose::kPartition});
  const PartitionSpec partition = dirichlet_partition(
      task.target_train.labels, cfg.n_clients, cfg.alpha, partition_stream);

  std::vector<Dataset> client_data;
  client_data.reserve(partition.n_clients());
  for (const auto& idx : partition.client_indices) {
    client_data.push_back(gather(task.target_train, idx));
  }

  const LayoutPtr layout = make_layout(backbone, cfg.lora_rank);
  RngStream init_stream(cfg.seed, {StreamPurpose::kAdapterInit});
  const LoraAdapter adapter = init_lora(backbone, cfg.lora_rank,
                                        cfg.lora_init_std, cfg.lora_scaling,
                                        init_stream);
  ServerState state = ServerState::init(flatten(adapter, layout));

  const auto strategy = make_strategy(cfg.strategy);
  RunContext ctx;
  ctx.backbone = &backbone;
  ctx.layout = layout;
  ctx.scaling = cfg.lora_scaling;
  ctx.local = cfg.local;
  ctx.size_model = cfg.size_model;
  ctx.root_seed = cfg.seed;
  strategy->setup(ctx, state, cfg.n_clients);

  RoundConfig round_cfg;
  round_cfg.fedopt = cfg.fedopt;
  round_cfg.dp = cfg.dp;
  round_cfg.clients_per_round = cfg.cohort;

  std::vector<MetricsRow> rows;
  CommLedger ledger;
  const std::string strat_name{strategy->name()};
  std::size_t down_bytes_cum = 0, up_bytes_cum = 0;
  double time_cum = 0.0;

  const auto eval_row = [&](std::uint64_t display_round) {
    const EvalResult ev =
        evaluate(backbone, state.params, cfg.lora_scaling, task.target_test);
    MetricsRow row;
    row.round = display_round;
    row.seed = cfg.seed;
    row.strategy = strat_name;
    row.accuracy = ev.accuracy;
    row.loss = ev.loss;
    row.down_params_cum = ledger.down_cum();
    row.up_params_cum = ledger.up_cum();
    row.down_bytes_cum = down_bytes_cum;
    row.up_bytes_cum = up_bytes_cum;
    row.time_units = time_cum;
    row.wall_ms = wall_since(t0);
    rows.push_back(std::move(row));
  };

  eval_row(0);  // pre-training baseline

  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    const RoundMetrics rm =
        run_round(*strategy, state, ctx, client_data, r, round_cfg);
    ledger.record(r + 1, rm.down.params, rm.up.params);
    down_bytes_cum += rm.down.bytes;
    up_bytes_cum += rm.up.bytes;
    if (cfg.size_model.mode == SizeMode::kParamCount) {
      time_cum += comm_time_entry(ledger.entries().back(), cfg.bandwidth);
    } else {
      time_cum += static_cast<double>(rm.down.bytes) / cfg.bandwidth.bw_down +
                  static_cast<double>(rm.up.bytes) / cfg.bandwidth.bw_up();
    }
    if ((r + 1) % cfg.eval_every == 0 || r + 1 == cfg.rounds) {
      eval_row(r + 1);
    }
  }

  Backbone merged = merge(backbone, unflatten(state.params, cfg.lora_scaling));
  return ExperimentResult{cfg,
                          std::move(rows),
                          state.params,
                          std::move(merged),
                          std::move(ledger),
                          wall_since(t0)};
}

void write_metrics_csv(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<MetricsRow>& rows,
                       const std::string& tags) {
  os << "# flasc-sim metrics v1\n";
  std::stringstream echo(emit_config(cfg));
  std::string line;
  while (std::getline(echo, line)) {
    os << "# " << line << '\n';
  }
  const bool bytes = cfg.size_model.mode == SizeMode::kByteExact;
  os << "round,seed,strategy,accuracy,loss,down_params_cum,up_params_cum";
  if (bytes) os << ",down_bytes_cum,up_bytes_cum";
  os << ",time_units";
  if (!tags.empty()) os << ",tags";
  os << '\n';
  for (const MetricsRow& r : rows) {
    os << r.round << ',' << r.seed << ',' << r.strategy << ','
       << format_double(r.accuracy) << ',' << format_double(r.loss) << ','
       << r.down_params_cum << ',' << r.up_params_cum;
    if (bytes) os << ',' << r.down_bytes_cum << ',' << r.up_bytes_cum;
    os << ',' << format_double(r.time_units);
    if (!tags.empty()) os << ',' << tags;
    os << '\n';
  }
}

std::string resolve_out_path(const std::string& out) {
  const char* dir = std::getenv("FLASC_OUT_DIR");
  if (dir == nullptr || *dir == '\0') return out;
  return (std::filesystem::path(dir) / std::filesystem::path(out).filename())
      .string();
}

namespace {

void write_params_txt(std::ostream& os, const FlatParams& p) {
  os << "# flasc-sim params v1\n";
  os << "rank=" << p.layout->rank() << "\n";
  os << "segments=";
  for (std::size_t i = 0; i < p.layout->segments().size(); ++i) {
    const auto& s = p.layout->segments()[i];
    if (i) os << ';';
    os << s.layer << ',' << (s.is_b ? 'B' : 'A') << ',' << s.rows << ','
       << s.cols << ',' << s.offset;
  }
  os << "\nlength=" << p.size() << "\n";
  for (double v : p.values) os << format_double(v) << '\n';
}

void write_backbone_txt(std::ostream& os, const Backbone& b) {
  os << "# flasc-sim backbone v1\n";
  os << "layers=" << b.n_layers() << "\n";
  for (std::size_t l = 0; l < b.n_layers(); ++l) {
    const DenseLayer& layer = b.layer(l);
    os << "layer=" << l << " rows=" << layer.weight.rows()
       << " cols=" << layer.weight.cols() << "\n";
    for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
      const auto row = layer.weight.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) os << ' ';
        os << format_double(row[j]);
      }
      os << '\n';
    }
    os << "bias=";
    for (std::size_t j = 0; j < layer.bias.size(); ++j) {
      if (j) os << ' ';
      os << format_double(layer.bias[j]);
    }
    os << '\n';
  }
}

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open output file: " + path);
  }
  return f;
}

}  // namespace

ExperimentResult run_experiment_to_files(const ExperimentConfig& cfg) {
  ExperimentResult res = run_experiment(cfg);
  const std::string out = resolve_out_path(cfg.out);
  {
    auto f = open_or_throw(out);
    write_metrics_csv(f, cfg, res.rows);
  }
  {
    auto f = open_or_throw(out + ".params.txt");
    write_params_txt(f, res.final_params);
  }
  {
    auto f = open_or_throw(out + ".merged.txt");
    write_backbone_txt(f, res.merged);
  }
  if (cfg.dump_task || cfg.dump_partition) {
    // Regenerate deterministically from the same streams.
    RngStream task_stream(cfg.seed, {StreamPurpose::kTaskGen});
    const TaskPair task = gen_task_pair(cfg.task, task_stream);
    if (cfg.dump_task) {
      auto f = open_or_throw(out + ".task.csv");
      write_dataset_csv(f, task.target_train);
    }
    if (cfg.dump_partition) {
      RngStream partition_stream(cfg.seed, {StreamPurpose::kPartition});
      const PartitionSpec partition = dirichlet_partition(
          task.target_train.labels, cfg.n_clients, cfg.alpha, partition_stream);
      auto f = open_or_throw(out + ".partition.txt");
      write_partition(f, partition);
    }
  }
  return res;
}

// --- sweeps -----------------------------------------------------------------

std::vector<SweepPoint> run_sweep(const std::string& gridspec_text) {
  std::string base_text;
  std::map<std::string, std::vector<std::string>> axes;

  std::stringstream ss(gridspec_text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    std::string key =
        eq == std::string::npos ? "" : line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.rfind("sweep.", 0) == 0) {
      const std::string axis = key.substr(6);
      if (axis.empty()) throw ConfigError("sweep.: empty axis key");
      std::vector<std::string> values;
      std::stringstream vs(line.substr(eq + 1));
      std::string v;
      while (std::getline(vs, v, ',')) {
        const auto b = v.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = v.find_last_not_of(" \t\r");
        values.push_back(v.substr(b, e - b + 1));
      }
      if (values.empty()) {
        throw ConfigError("sweep." + axis + ": no values");
      }
      axes[axis] = values;
    } else {
      base_text += line;
      base_text += '\n';
    }
  }

  // Cartesian product in sorted axis order.
  std::vector<std::map<std::string, std::string>> points;
  points.emplace_back();
  for (const auto& [axis, values] : axes) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        auto q = p;
        q[axis] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }

  std::vector<SweepPoint> out;
  out.reserve(points.size());
  for (const auto& grid : points) {
    SweepPoint pt;
    pt.grid = grid;
    std::string tags;
    std::string overrides;
    for (const auto& [k, v] : grid) {
      if (!tags.empty()) tags += ';';
      tags += k + "=" + v;
      overrides += k + "=" + v + "\n";
    }
    pt.tags = tags;
    try {
      const ExperimentConfig cfg = parse_config(base_text + overrides);
      pt.result = run_experiment(cfg);
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// --- plot data ---------------------------------------------------------------

ParsedMetrics read_metrics_csv(std::istream& is) {
  ParsedMetrics pm;
  std::string line;
  bool have_columns = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const auto b = body.find_first_not_of(' ');
      if (b == std::string::npos) continue;
      body = body.substr(b);
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        pm.config[body.substr(0, eq)] = body.substr(eq + 1);
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!have_columns) {
      pm.columns = std::move(fields);
      have_columns = true;
    } else {
      pm.rows.push_back(std::move(fields));
    }
  }
  if (!have_columns) {
    throw std::runtime_error("read_metrics_csv: no column header found");
  }
  return pm;
}

double ParsedMetrics::number(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) {
    throw std::runtime_error("metrics: no column named '" + column + "'");
  }
  return std::stod(rows[row][static_cast<std::size_t>(it - columns.begin())]);
}

std::vector<PlotPoint> emit_plotdata(const std::vector<ParsedMetrics>& metrics,
                                     const std::string& x_axis,
                                     const std::string& y_axis) {
  if (y_axis != "accuracy" && y_axis != "loss") {
    throw std::runtime_error("plotdata: unknown y axis '" + y_axis + "'");
  }
  const bool x_comm_sum = x_axis == "comm_params_cum";
  if (metrics.empty()) {
    throw std::runtime_error("plotdata: no metrics");
  }
  std::vector<PlotPoint> out;
  for (const ParsedMetrics& pm : metrics) {
    if (pm.rows.empty()) continue;
    const auto col = [&](const std::string& name) {
      return std::find(pm.columns.begin(), pm.columns.end(), name) !=
             pm.columns.end();
    };
    if (!x_comm_sum && !col(x_axis)) {
      throw std::runtime_error("plotdata: unknown x axis '" + x_axis + "'");
    }
    const bool has_tags = col("tags");
    for (std::size_t i = 0; i < pm.rows.size(); ++i) {
      PlotPoint p;
      p.x = x_comm_sum ? pm.number(i, "down_params_cum") +
                             pm.number(i, "up_params_cum")
                       : pm.number(i, x_axis);
      p.y = pm.number(i, y_axis);
      p.seed = static_cast<std::uint64_t>(pm.number(i, "seed"));
      const auto strat_col =
          std::find(pm.columns.begin(), pm.columns.end(), "strategy");
      if (strat_col == pm.columns.end()) {
        throw std::runtime_error("plotdata: metrics missing strategy column");
      }
      p.series =
          pm.rows[i][static_cast<std::size_t>(strat_col - pm.columns.begin())];
      if (has_tags) {
        const auto tags_col =
            std::find(pm.columns.begin(), pm.columns.end(), "tags");
        const std::string& t =
            pm.rows[i][static_cast<std::size_t>(tags_col - pm.columns.begin())];
        // Seeds pool into bands and the strategy is already the series stem,
        // so drop those tags from the label.
        std::stringstream ts(t);
        std::string item;
        while (std::getline(ts, item, ';')) {
          if (item.empty() || item == "-" || item.rfind("seed=", 0) == 0 ||
              item == "strategy=" + p.series) {
            continue;
          }
          p.series += ";" + item;
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<BandPoint> plot_bands(const std::vector<PlotPoint>& points) {
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const PlotPoint& p : points) {
    groups[{p.series, p.x}].push_back(p.y);
  }
  std::vector<BandPoint> out;
  out.reserve(groups.size());
  for (const auto& [key, ys] : groups) {
    BandPoint b;
    b.series = key.first;
    b.x = key.second;
    b.y_min = *std::min_element(ys.begin(), ys.end());
    b.y_max = *std::max_element(ys.begin(), ys.end());
    double sum = 0.0;
    for (double y : ys) sum += y;
    b.y_mean = sum / static_cast<double>(ys.size());
    out.push_back(std::move(b));
  }
  return out;
}

void write_plotdata_csv(std::ostream& os, const std::vector<PlotPoint>& points) {
  os << "x,y,series,seed\n";
  for (const PlotPoint& p : points) {
    os << format_double(p.x) << ',' << format_double(p.y) << ',' << p.series
       << ',' << p.seed << '\n';
  }
}

void write_bands_csv(std::ostream& os, const std::vector<BandPoint>& bands) {
  os << "x,series,y_min,y_mean,y_max\n";
  for (const BandPoint& b : bands) {
    os << format_double(b.x) << ',' << b.series << ',' << format_double(b.y_min)
       << ',' << format_double(b.y_mean) << ',' << format_double(b.y_max)
       << '\n';
  }
}

}  // namespace flasc
