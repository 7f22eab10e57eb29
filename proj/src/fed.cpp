// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/fed.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flasc {

ServerState ServerState::init(FlatParams initial_params) {
  ServerState s;
  const std::size_t n = initial_params.size();
  s.params = std::move(initial_params);
  s.adam_m.assign(n, 0.0);
  s.adam_v.assign(n, 0.0);
  return s;
}

std::vector<std::size_t> sample_clients(std::size_t pool_size, std::size_t n,
                                        RngStream& stream) {
  if (n > pool_size) {
    throw std::invalid_argument("sample_clients: n exceeds pool size");
  }
  // Partial Fisher-Yates: the first n slots are a uniform n-subset.
  std::vector<std::size_t> pool(pool_size);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + stream.next_below(pool_size - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

FlatParams aggregate(const std::vector<ClientUpdate>& updates, Weighting weighting) {
  if (updates.empty()) {
    throw std::invalid_argument("aggregate: no updates");
  }
  for (const ClientUpdate& u : updates) {
    require_same_layout(u.delta, updates.front().delta, "aggregate");
  }
  FlatParams out = zeros_like(updates.front().delta);
  if (weighting == Weighting::kUniform) {
    const double w = 1.0 / static_cast<double>(updates.size());
    for (const ClientUpdate& u : updates) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] += w * u.delta.values[i];
      }
    }
  } else {
    double total = 0.0;
    for (const ClientUpdate& u : updates) {
      total += static_cast<double>(u.example_count);
    }
    if (total <= 0.0) {
      throw std::invalid_argument("aggregate: zero total example count");
    }
    for (const ClientUpdate& u : updates) {
      const double w = static_cast<double>(u.example_count) / total;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] += w * u.delta.values[i];
      }
    }
  }
  return out;
}

void fedadam_step(ServerState& state, const FlatParams& pseudo_grad,
                  const FedOptConfig& cfg) {
  require_same_layout(state.params, pseudo_grad, "fedadam_step");
  for (double g : pseudo_grad.values) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("fedadam_step: non-finite pseudo-gradient");
    }
  }
  const std::uint64_t t = state.step_count + 1;
  const double bc1 = cfg.bias_correction
                         ? 1.0 - std::pow(cfg.beta1, static_cast<double>(t))
                         : 1.0;
  const double bc2 = cfg.bias_correction
                         ? 1.0 - std::pow(cfg.beta2, static_cast<double>(t))
                         : 1.0;
  const Mask* frozen =
      state.frozen_mask.has_value() ? &*state.frozen_mask : nullptr;
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    if (frozen != nullptr && frozen->test(i)) continue;
    const double g = pseudo_grad.values[i];
    double& m = state.adam_m[i];
    double& v = state.adam_v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    state.params.values[i] -= cfg.server_lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
  state.step_count = t;
}

void freeze_coordinates(ServerState& state, const Mask& frozen) {
  if (frozen.size() != state.params.size()) {
    throw std::invalid_argument("freeze_coordinates: size mismatch");
  }
  if (!state.frozen_mask.has_value()) {
    state.frozen_mask = Mask(state.params.size());
  }
  state.frozen_mask->merge(frozen);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    if (state.frozen_mask->test(i)) {
      state.params.values[i] = 0.0;
      state.adam_m[i] = 0.0;
      state.adam_v[i] = 0.0;
    }
  }
}

Mask trainable_mask(const ServerState& state) {
  if (!state.frozen_mask.has_value()) {
    return Mask::ones(state.params.size());
  }
  return state.frozen_mask->complement();
}

EvalResult evaluate(const Backbone& backbone, const FlatParams& params,
                    double scaling, const Dataset& test_set) {
  if (test_set.size() == 0) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  const LoraAdapter adapter = unflatten(params, scaling);
  const ForwardResult fr = forward(backbone, adapter, test_set);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto row = fr.logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (best == static_cast<std::size_t>(test_set.labels[i])) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(test_set.size()),
          fr.loss};
}

}  // namespace flasc
