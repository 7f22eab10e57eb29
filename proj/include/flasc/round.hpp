// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_ROUND_HPP
#define FLASC_ROUND_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flasc/data.hpp"
#include "flasc/fed.hpp"
#include "flasc/privacy.hpp"
#include "flasc/strategies.hpp"

namespace flasc {

struct RoundConfig {
  FedOptConfig fedopt;
  DpConfig dp;
  std::size_t clients_per_round = 10;
};

struct RoundMetrics {
  std::uint64_t round = 0;
  std::vector<std::size_t> sampled;
  SizeRecord down;  // summed over sampled clients
  SizeRecord up;
};

// One federated round: sample clients, run the strategy's client protocol
// (in parallel), aggregate, optionally apply DP, take the server Adam step,
// then let the strategy's post-round hook run. A pure function of (state,
// partitioned data, configs, root seed, round index): replay is bit-exact
// regardless of thread count.
RoundMetrics run_round(Strategy& strategy, ServerState& state,
                       const RunContext& ctx,
                       const std::vector<Dataset>& client_data,
                       std::uint64_t round, const RoundConfig& cfg);

}  // namespace flasc

#endif  // FLASC_ROUND_HPP
