// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/privacy.hpp"

#include <algorithm>
#include <stdexcept>

namespace flasc {

void DpConfig::validate() const {
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("dp.clip: clipping norm must be positive");
  }
  if (noise_multiplier < 0.0) {
    throw std::invalid_argument("dp.sigma: noise multiplier must be >= 0");
  }
}

FlatParams clip_update(const FlatParams& delta, double clip_norm) {
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("clip_update: clip norm must be positive");
  }
  const double norm = l2_norm(delta.values);  // rejects non-finite entries
  FlatParams out = delta;
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& x : out.values) x *= scale;
  }
  return out;
}

FlatParams dp_aggregate(const std::vector<ClientUpdate>& updates,
                        const DpConfig& dp, std::size_t sampled_n,
                        RngStream& stream) {
  if (updates.empty()) {
    throw std::invalid_argument("dp_aggregate: no updates");
  }
  dp.validate();
  FlatParams out = zeros_like(updates.front().delta);
  for (const ClientUpdate& u : updates) {
    require_same_layout(u.delta, out, "dp_aggregate");
    const FlatParams clipped = clip_update(u.delta, dp.clip_norm);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] += clipped.values[i];
    }
  }
  const double inv = 1.0 / (static_cast<double>(sampled_n) * dp.clip_norm);
  for (double& x : out.values) x *= inv;
  if (dp.noise_multiplier > 0.0) {
    const std::size_t cohort =
        dp.simulated_cohort > 0 ? dp.simulated_cohort : sampled_n;
    const double noise_std = dp.noise_multiplier / static_cast<double>(cohort);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] += stream.next_normal() * noise_std;
    }
  }
  return out;
}

}  // namespace flasc
