// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_FED_HPP
#define FLASC_FED_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "flasc/layout.hpp"
#include "flasc/mask.hpp"
#include "flasc/model.hpp"
#include "flasc/rng.hpp"
#include "flasc/sparsity.hpp"

namespace flasc {

enum class Weighting { kUniform, kByExampleCount };

struct FedOptConfig {
  double server_lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool bias_correction = true;
  Weighting weighting = Weighting::kUniform;
};

// Global adapter parameters plus the server Adam state. frozen_mask, when
// set, marks coordinates permanently zeroed-and-frozen by a pruning
// strategy: they stay exactly 0 in params, m and v.
struct ServerState {
  FlatParams params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;
  std::optional<Mask> frozen_mask;

  static ServerState init(FlatParams initial_params);
};

// One client's masked parameter delta (download minus trained), with the
// example count and communicated-size record.
struct ClientUpdate {
  FlatParams delta;  // zero outside upload_mask
  Mask upload_mask;
  std::size_t example_count = 0;
  std::size_t up_size = 0;
};

// n distinct ids, uniform over n-subsets of [0, pool_size).
std::vector<std::size_t> sample_clients(std::size_t pool_size, std::size_t n,
                                        RngStream& stream);

// Mean of deltas (uniform) or example-count-weighted mean; summation runs in
// ascending client-index order so parallel client execution cannot change
// the result.
FlatParams aggregate(const std::vector<ClientUpdate>& updates, Weighting weighting);

// One Adam step on the pseudo-gradient. Frozen coordinates are skipped
// entirely: gradient ignored, moments untouched, parameter stays 0.
void fedadam_step(ServerState& state, const FlatParams& pseudo_grad,
                  const FedOptConfig& cfg);

// Zero params/m/v on the given coordinates and record them as frozen
// (monotonically growing across calls).
void freeze_coordinates(ServerState& state, const Mask& frozen);

// Coordinates still trainable (complement of the frozen set).
Mask trainable_mask(const ServerState& state);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Top-1 accuracy (argmax, ties toward the lower class index) and mean
// cross-entropy of the adapted model.
EvalResult evaluate(const Backbone& backbone, const FlatParams& params,
                    double scaling, const Dataset& test_set);

}  // namespace flasc

#endif  // FLASC_FED_HPP
