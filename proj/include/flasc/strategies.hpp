// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_STRATEGIES_HPP
#define FLASC_STRATEGIES_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "flasc/fed.hpp"
#include "flasc/model.hpp"
#include "flasc/sparsity.hpp"

namespace flasc {

// The seven round protocols. Each defines download payload construction,
// client local behavior, and upload construction.
enum class StrategyKind {
  kDense,
  kFlasc,
  kSparseAdapter,
  kAdapterLth,
  kFedSelect,
  kHetLora,
  kFfaLora,
};

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kDense;
  DensityConfig density;          // flasc: down+up; sparseadapter/fedselect: down
  double lth_keep = 0.98;         // adapter_lth: fraction kept per prune event
  std::size_t lth_period = 1;     // adapter_lth: rounds between prune events
  std::size_t budget_tiers = 2;   // hetlora: b_s; local rank r_c = 4^(tier)

  void validate() const;
};

std::string_view strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(std::string_view name);

// Per-client budget tier in {1, ..., tiers}, i.i.d. uniform.
struct BudgetAssignment {
  std::vector<std::size_t> tier;
};
BudgetAssignment assign_budgets(std::size_t n_clients, std::size_t tiers,
                                RngStream& stream);

// Everything a strategy needs that is fixed for the whole run.
struct RunContext {
  const Backbone* backbone = nullptr;
  LayoutPtr layout;
  double scaling = 1.0;
  LocalTrainConfig local;
  SizeModel size_model;
  std::uint64_t root_seed = 0;
};

// Download and upload sizes in both accounting units.
struct SizeRecord {
  std::size_t params = 0;
  std::size_t bytes = 0;
};
SizeRecord sizes_of(const Mask& m);

struct ClientResult {
  ClientUpdate update;
  SizeRecord down;
  SizeRecord up;
};

class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual StrategyKind kind() const = 0;
  std::string_view name() const { return strategy_name(kind()); }

  // Run-start hook (e.g. budget assignment).
  virtual void setup(const RunContext& ctx, const ServerState& state,
                     std::size_t n_clients);

  // Computes round-scoped plan (e.g. the shared download mask) from the
  // current server state.
  virtual void begin_round(const RunContext& ctx, const ServerState& state,
                           std::uint64_t round);

  // The per-client protocol. Pure given its derived stream; safe to call
  // concurrently for distinct clients.
  virtual ClientResult run_client(const RunContext& ctx, const ServerState& state,
                                  std::uint64_t round, std::size_t client_id,
                                  const Dataset& client_data) const = 0;

  // Post-server-step hook; pruning strategies freeze coordinates here.
  virtual void end_round(const RunContext& ctx, ServerState& state,
                         std::uint64_t round);
};

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg);

// Rank-r_c slice of the global adapter: uppermost r_c rows of each A_l,
// leftmost r_c columns of each B_l. Exposed for tests.
Mask hetlora_slice_mask(const ParamLayout& global_layout, std::size_t local_rank);
FlatParams hetlora_slice(const FlatParams& global_params, const LayoutPtr& local_layout);
FlatParams hetlora_pad(const FlatParams& local_params, const LayoutPtr& global_layout);

// All B segments of a layout (the FFA-LoRA trainable set).
Mask b_segment_mask(const ParamLayout& layout);

}  // namespace flasc

#endif  // FLASC_STRATEGIES_HPP
