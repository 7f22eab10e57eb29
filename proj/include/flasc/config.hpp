// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_CONFIG_HPP
#define FLASC_CONFIG_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include "flasc/data.hpp"
#include "flasc/fed.hpp"
#include "flasc/privacy.hpp"
#include "flasc/strategies.hpp"

namespace flasc {

// Invalid configuration input; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fully resolved experiment description. Parsed from a flat key=value
// document; every default that influences a run is echoed back into the
// metrics header via emit_config.
struct ExperimentConfig {
  StrategyConfig strategy;
  FedOptConfig fedopt;
  LocalTrainConfig local;
  DpConfig dp;
  TaskSpec task;
  PretrainConfig pretrain;

  std::uint64_t seed = 1;
  std::size_t rounds = 200;
  std::size_t cohort = 10;  // clients sampled per round
  std::size_t eval_every = 1;

  std::size_t lora_rank = 16;
  double lora_init_std = 0.02;
  double lora_scaling = 1.0;

  std::size_t n_clients = 100;
  double alpha = 1.0;

  BandwidthModel bandwidth;
  SizeModel size_model;

  std::string out = "metrics.csv";
  bool dump_task = false;
  bool dump_partition = false;
};

// Parses and validates; unknown keys, type errors and invariant violations
// raise ConfigError naming the key. Defaults fill everything not given.
ExperimentConfig parse_config(const std::string& text);

// Canonical echo: sorted key=value lines, one per key. Reparses to an equal
// config.
std::string emit_config(const ExperimentConfig& cfg);

// %.17g, round-trip exact.
std::string format_double(double x);

}  // namespace flasc

#endif  // FLASC_CONFIG_HPP
