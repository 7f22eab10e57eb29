// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/round.hpp"

#include <stdexcept>
#include <string>

namespace flasc {

RoundMetrics run_round(Strategy& strategy, ServerState& state,
                       const RunContext& ctx,
                       const std::vector<Dataset>& client_data,
                       std::uint64_t round, const RoundConfig& cfg) {
  RngStream sample_stream(ctx.root_seed, {StreamPurpose::kClientSample, round});
  const std::vector<std::size_t> sampled =
      sample_clients(client_data.size(), cfg.clients_per_round, sample_stream);

  strategy.begin_round(ctx, state, round);

  std::vector<ClientResult> results(sampled.size());
  bool failed = false;
  std::string error;
// Client phases are pure given their streams; results land by index and the
// reduction below is serial, so thread count never changes the outcome.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    try {
      results[i] = strategy.run_client(ctx, state, round, sampled[i],
                                       client_data[sampled[i]]);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) {
    throw std::runtime_error("run_round: client phase failed: " + error);
  }

  std::vector<ClientUpdate> updates;
  updates.reserve(results.size());
  for (auto& r : results) updates.push_back(std::move(r.update));

  FlatParams pseudo_grad;
  if (cfg.dp.enabled) {
    RngStream noise_stream(ctx.root_seed, {StreamPurpose::kDpNoise, round});
    pseudo_grad = dp_aggregate(updates, cfg.dp, updates.size(), noise_stream);
  } else {
    pseudo_grad = aggregate(updates, cfg.fedopt.weighting);
  }
  fedadam_step(state, pseudo_grad, cfg.fedopt);

  strategy.end_round(ctx, state, round);

  RoundMetrics metrics;
  metrics.round = round;
  metrics.sampled = sampled;
  for (const auto& r : results) {
    metrics.down.params += r.down.params;
    metrics.down.bytes += r.down.bytes;
    metrics.up.params += r.up.params;
    metrics.up.bytes += r.up.bytes;
  }
  return metrics;
}

}  // namespace flasc
