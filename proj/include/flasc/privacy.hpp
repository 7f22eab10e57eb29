// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_PRIVACY_HPP
#define FLASC_PRIVACY_HPP

#include <cstddef>

#include "flasc/fed.hpp"
#include "flasc/layout.hpp"
#include "flasc/rng.hpp"

namespace flasc {

// Global DP applied to the server aggregate. sigma = 0 disables the noise
// but keeps clipping and normalization. simulated_cohort is the nominal
// cohort whose noise level is linearly scaled down to the sampled cohort.
struct DpConfig {
  bool enabled = false;
  double clip_norm = 1.0;       // C > 0
  double noise_multiplier = 0.0;  // sigma >= 0
  std::size_t simulated_cohort = 0;  // N_sim >= sampled n; 0 = use sampled n

  void validate() const;
};

// delta * min(1, C / ||delta||): output norm never exceeds C.
FlatParams clip_update(const FlatParams& delta, double clip_norm);

// g = (1 / (n C)) * sum_i clip_C(delta_i) + z with z ~ N(0, (sigma/N_sim)^2 I).
// Clipping operates on the uploaded (already masked) deltas; the noise draw
// is dense.
FlatParams dp_aggregate(const std::vector<ClientUpdate>& updates,
                        const DpConfig& dp, std::size_t sampled_n,
                        RngStream& stream);

}  // namespace flasc

#endif  // FLASC_PRIVACY_HPP
