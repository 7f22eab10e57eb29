// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/config.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace flasc {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("");
    const std::uint64_t x = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

std::vector<std::size_t> parse_uint_list(const std::string& key,
                                         const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_uint(key, trim(item)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "strategy") {
    try {
      cfg.strategy.kind = strategy_from_name(value);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "seed") {
    cfg.seed = parse_uint(key, value);
  } else if (key == "rounds") {
    cfg.rounds = parse_uint(key, value);
  } else if (key == "cohort") {
    cfg.cohort = parse_uint(key, value);
  } else if (key == "eval.every") {
    cfg.eval_every = parse_uint(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "lora.rank") {
    cfg.lora_rank = parse_uint(key, value);
  } else if (key == "lora.init_std") {
    cfg.lora_init_std = parse_double(key, value);
  } else if (key == "lora.scaling") {
    cfg.lora_scaling = parse_double(key, value);
  } else if (key == "density.down") {
    cfg.strategy.density.down = parse_double(key, value);
  } else if (key == "density.up") {
    cfg.strategy.density.up = parse_double(key, value);
  } else if (key == "density.scope") {
    if (value == "global") {
      cfg.strategy.density.scope = SparsityScope::kGlobal;
    } else if (value == "layerwise") {
      cfg.strategy.density.scope = SparsityScope::kLayerwise;
    } else {
      throw ConfigError("density.scope: expected global or layerwise");
    }
  } else if (key == "lth.keep") {
    cfg.strategy.lth_keep = parse_double(key, value);
  } else if (key == "lth.period") {
    cfg.strategy.lth_period = parse_uint(key, value);
  } else if (key == "hetlora.tiers") {
    cfg.strategy.budget_tiers = parse_uint(key, value);
  } else if (key == "fedopt.lr") {
    cfg.fedopt.server_lr = parse_double(key, value);
  } else if (key == "fedopt.beta1") {
    cfg.fedopt.beta1 = parse_double(key, value);
  } else if (key == "fedopt.beta2") {
    cfg.fedopt.beta2 = parse_double(key, value);
  } else if (key == "fedopt.eps") {
    cfg.fedopt.adam_eps = parse_double(key, value);
  } else if (key == "fedopt.bias_correction") {
    cfg.fedopt.bias_correction = parse_bool(key, value);
  } else if (key == "fedopt.weighting") {
    if (value == "uniform") {
      cfg.fedopt.weighting = Weighting::kUniform;
    } else if (value == "examples") {
      cfg.fedopt.weighting = Weighting::kByExampleCount;
    } else {
      throw ConfigError("fedopt.weighting: expected uniform or examples");
    }
  } else if (key == "local.lr") {
    cfg.local.lr = parse_double(key, value);
  } else if (key == "local.momentum") {
    cfg.local.momentum = parse_double(key, value);
  } else if (key == "local.batch_size") {
    cfg.local.batch_size = parse_uint(key, value);
  } else if (key == "local.epochs") {
    cfg.local.epochs = parse_uint(key, value);
  } else if (key == "dp.enabled") {
    cfg.dp.enabled = parse_bool(key, value);
  } else if (key == "dp.clip") {
    cfg.dp.clip_norm = parse_double(key, value);
  } else if (key == "dp.sigma") {
    cfg.dp.noise_multiplier = parse_double(key, value);
  } else if (key == "dp.sim_cohort") {
    cfg.dp.simulated_cohort = parse_uint(key, value);
  } else if (key == "task.dim") {
    cfg.task.feature_dim = parse_uint(key, value);
  } else if (key == "task.classes") {
    cfg.task.n_classes = parse_uint(key, value);
  } else if (key == "task.source_size") {
    cfg.task.source_size = parse_uint(key, value);
  } else if (key == "task.train_size") {
    cfg.task.target_train_size = parse_uint(key, value);
  } else if (key == "task.test_size") {
    cfg.task.target_test_size = parse_uint(key, value);
  } else if (key == "task.cluster_std") {
    cfg.task.cluster_std = parse_double(key, value);
  } else if (key == "task.mean_scale") {
    cfg.task.mean_scale = parse_double(key, value);
  } else if (key == "task.rotation") {
    cfg.task.rotation = parse_double(key, value);
  } else if (key == "task.shift") {
    cfg.task.shift = parse_double(key, value);
  } else if (key == "pretrain.lr") {
    cfg.pretrain.lr = parse_double(key, value);
  } else if (key == "pretrain.momentum") {
    cfg.pretrain.momentum = parse_double(key, value);
  } else if (key == "pretrain.batch_size") {
    cfg.pretrain.batch_size = parse_uint(key, value);
  } else if (key == "pretrain.max_epochs") {
    cfg.pretrain.max_epochs = parse_uint(key, value);
  } else if (key == "pretrain.target_acc") {
    cfg.pretrain.target_accuracy = parse_double(key, value);
  } else if (key == "pretrain.hidden") {
    cfg.pretrain.hidden = parse_uint_list(key, value);
  } else if (key == "partition.clients") {
    cfg.n_clients = parse_uint(key, value);
  } else if (key == "partition.alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "bandwidth.down") {
    cfg.bandwidth.bw_down = parse_double(key, value);
  } else if (key == "bandwidth.upload_ratio") {
    cfg.bandwidth.upload_ratio = parse_double(key, value);
  } else if (key == "size.mode") {
    if (value == "params") {
      cfg.size_model.mode = SizeMode::kParamCount;
    } else if (value == "bytes") {
      cfg.size_model.mode = SizeMode::kByteExact;
    } else {
      throw ConfigError("size.mode: expected params or bytes");
    }
  } else if (key == "dump.task") {
    cfg.dump_task = parse_bool(key, value);
  } else if (key == "dump.partition") {
    cfg.dump_partition = parse_bool(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

void validate(ExperimentConfig& cfg, const std::set<std::string>& given) {
  if (cfg.rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (cfg.cohort < 1) throw ConfigError("cohort: must be >= 1");
  if (cfg.cohort > cfg.n_clients) {
    throw ConfigError("cohort: exceeds partition.clients");
  }
  if (cfg.eval_every < 1) throw ConfigError("eval.every: must be >= 1");
  if (cfg.lora_rank < 1) throw ConfigError("lora.rank: must be >= 1");
  if (!(cfg.lora_init_std >= 0.0)) {
    throw ConfigError("lora.init_std: must be >= 0");
  }
  if (!(cfg.local.lr > 0.0)) throw ConfigError("local.lr: must be positive");
  if (cfg.local.momentum < 0.0 || cfg.local.momentum >= 1.0) {
    throw ConfigError("local.momentum: must be in [0, 1)");
  }
  if (cfg.local.batch_size < 1) throw ConfigError("local.batch_size: must be >= 1");
  if (cfg.local.epochs < 1) throw ConfigError("local.epochs: must be >= 1");
  if (!(cfg.fedopt.server_lr > 0.0)) throw ConfigError("fedopt.lr: must be positive");
  if (cfg.fedopt.beta1 < 0.0 || cfg.fedopt.beta1 >= 1.0 ||
      cfg.fedopt.beta2 < 0.0 || cfg.fedopt.beta2 >= 1.0) {
    throw ConfigError("fedopt.beta1/beta2: must be in [0, 1)");
  }
  if (!(cfg.fedopt.adam_eps > 0.0)) throw ConfigError("fedopt.eps: must be positive");
  if (!(cfg.alpha > 0.0)) throw ConfigError("partition.alpha: must be positive");
  if (cfg.n_clients < 1) throw ConfigError("partition.clients: must be >= 1");
  if (!(cfg.bandwidth.bw_down > 0.0) || !(cfg.bandwidth.upload_ratio > 0.0)) {
    throw ConfigError("bandwidth: must be positive");
  }
  try {
    cfg.strategy.validate();
    cfg.task.validate();
    if (cfg.dp.enabled) {
      cfg.dp.validate();
      if (cfg.dp.simulated_cohort != 0 && cfg.dp.simulated_cohort < cfg.cohort) {
        throw ConfigError("dp.sim_cohort: must be >= cohort");
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  if (cfg.strategy.kind == StrategyKind::kHetLora) {
    std::size_t expected = 1;
    for (std::size_t b = 0; b < cfg.strategy.budget_tiers; ++b) expected *= 4;
    if (given.count("lora.rank") && cfg.lora_rank != expected) {
      throw ConfigError("lora.rank: hetlora requires rank 4^tiers = " +
                        std::to_string(expected));
    }
    cfg.lora_rank = expected;
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> given;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    apply_key(cfg, key, value);
    given.insert(key);
  }
  validate(cfg, given);
  return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["strategy"] = std::string(strategy_name(cfg.strategy.kind));
  kv["seed"] = std::to_string(cfg.seed);
  kv["rounds"] = std::to_string(cfg.rounds);
  kv["cohort"] = std::to_string(cfg.cohort);
  kv["eval.every"] = std::to_string(cfg.eval_every);
  kv["out"] = cfg.out;
  kv["lora.rank"] = std::to_string(cfg.lora_rank);
  kv["lora.init_std"] = format_double(cfg.lora_init_std);
  kv["lora.scaling"] = format_double(cfg.lora_scaling);
  kv["density.down"] = format_double(cfg.strategy.density.down);
  kv["density.up"] = format_double(cfg.strategy.density.up);
  kv["density.scope"] =
      cfg.strategy.density.scope == SparsityScope::kGlobal ? "global" : "layerwise";
  kv["lth.keep"] = format_double(cfg.strategy.lth_keep);
  kv["lth.period"] = std::to_string(cfg.strategy.lth_period);
  kv["hetlora.tiers"] = std::to_string(cfg.strategy.budget_tiers);
  kv["fedopt.lr"] = format_double(cfg.fedopt.server_lr);
  kv["fedopt.beta1"] = format_double(cfg.fedopt.beta1);
  kv["fedopt.beta2"] = format_double(cfg.fedopt.beta2);
  kv["fedopt.eps"] = format_double(cfg.fedopt.adam_eps);
  kv["fedopt.bias_correction"] = cfg.fedopt.bias_correction ? "true" : "false";
  kv["fedopt.weighting"] =
      cfg.fedopt.weighting == Weighting::kUniform ? "uniform" : "examples";
  kv["local.lr"] = format_double(cfg.local.lr);
  kv["local.momentum"] = format_double(cfg.local.momentum);
  kv["local.batch_size"] = std::to_string(cfg.local.batch_size);
  kv["local.epochs"] = std::to_string(cfg.local.epochs);
  kv["dp.enabled"] = cfg.dp.enabled ? "true" : "false";
  kv["dp.clip"] = format_double(cfg.dp.clip_norm);
  kv["dp.sigma"] = format_double(cfg.dp.noise_multiplier);
  kv["dp.sim_cohort"] = std::to_string(cfg.dp.simulated_cohort);
  kv["task.dim"] = std::to_string(cfg.task.feature_dim);
  kv["task.classes"] = std::to_string(cfg.task.n_classes);
  kv["task.source_size"] = std::to_string(cfg.task.source_size);
  kv["task.train_size"] = std::to_string(cfg.task.target_train_size);
  kv["task.test_size"] = std::to_string(cfg.task.target_test_size);
  kv["task.cluster_std"] = format_double(cfg.task.cluster_std);
  kv["task.mean_scale"] = format_double(cfg.task.mean_scale);
  kv["task.rotation"] = format_double(cfg.task.rotation);
  kv["task.shift"] = format_double(cfg.task.shift);
  kv["pretrain.lr"] = format_double(cfg.pretrain.lr);
  kv["pretrain.momentum"] = format_double(cfg.pretrain.momentum);
  kv["pretrain.batch_size"] = std::to_string(cfg.pretrain.batch_size);
  kv["pretrain.max_epochs"] = std::to_string(cfg.pretrain.max_epochs);
  kv["pretrain.target_acc"] = format_double(cfg.pretrain.target_accuracy);
  {
    std::string h;
    for (std::size_t i = 0; i < cfg.pretrain.hidden.size(); ++i) {
      if (i) h += ',';
      h += std::to_string(cfg.pretrain.hidden[i]);
    }
    kv["pretrain.hidden"] = h;
  }
  kv["partition.clients"] = std::to_string(cfg.n_clients);
  kv["partition.alpha"] = format_double(cfg.alpha);
  kv["bandwidth.down"] = format_double(cfg.bandwidth.bw_down);
  kv["bandwidth.upload_ratio"] = format_double(cfg.bandwidth.upload_ratio);
  kv["size.mode"] =
      cfg.size_model.mode == SizeMode::kParamCount ? "params" : "bytes";
  kv["dump.task"] = cfg.dump_task ? "true" : "false";
  kv["dump.partition"] = cfg.dump_partition ? "true" : "false";

  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace flasc
