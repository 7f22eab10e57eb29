// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace flasc {

void StrategyConfig::validate() const {
  const auto check_density = [](double d, const char* key) {
    if (!(d > 0.0) || d > 1.0) {
      throw std::invalid_argument(std::string(key) + ": must be in (0, 1]");
    }
  };
  switch (kind) {
    case StrategyKind::kFlasc:
      check_density(density.down, "density.down");
      check_density(density.up, "density.up");
      break;
    case StrategyKind::kSparseAdapter:
    case StrategyKind::kFedSelect:
      check_density(density.down, "density.down");
      break;
    case StrategyKind::kAdapterLth:
      if (!(lth_keep > 0.0) || lth_keep >= 1.0) {
        throw std::invalid_argument("lth.keep: must be in (0, 1)");
      }
      if (lth_period < 1) {
        throw std::invalid_argument("lth.period: must be >= 1");
      }
      break;
    case StrategyKind::kHetLora:
      if (budget_tiers < 1) {
        throw std::invalid_argument("hetlora.tiers: must be >= 1");
      }
      break;
    case StrategyKind::kDense:
    case StrategyKind::kFfaLora:
      break;
  }
}

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kDense: return "dense";
    case StrategyKind::kFlasc: return "flasc";
    case StrategyKind::kSparseAdapter: return "sparseadapter";
    case StrategyKind::kAdapterLth: return "adapter_lth";
    case StrategyKind::kFedSelect: return "fedselect";
    case StrategyKind::kHetLora: return "hetlora";
    case StrategyKind::kFfaLora: return "ffa";
  }
  return "unknown";
}

StrategyKind strategy_from_name(std::string_view name) {
  if (name == "dense") return StrategyKind::kDense;
  if (name == "flasc") return StrategyKind::kFlasc;
  if (name == "sparseadapter") return StrategyKind::kSparseAdapter;
  if (name == "adapter_lth") return StrategyKind::kAdapterLth;
  if (name == "fedselect") return StrategyKind::kFedSelect;
  if (name == "hetlora") return StrategyKind::kHetLora;
  if (name == "ffa") return StrategyKind::kFfaLora;
  throw std::invalid_argument("strategy: unknown name '" + std::string(name) + "'");
}

BudgetAssignment assign_budgets(std::size_t n_clients, std::size_t tiers,
                                RngStream& stream) {
  if (tiers < 1) {
    throw std::invalid_argument("assign_budgets: tiers must be >= 1");
  }
  BudgetAssignment out;
  out.tier.resize(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    out.tier[i] = 1 + stream.next_below(tiers);
  }
  return out;
}

SizeRecord sizes_of(const Mask& m) {
  return {message_size(m, {SizeMode::kParamCount}),
          message_size(m, {SizeMode::kByteExact})};
}

void Strategy::setup(const RunContext&, const ServerState&, std::size_t) {}
void Strategy::begin_round(const RunContext&, const ServerState&, std::uint64_t) {}
void Strategy::end_round(const RunContext&, ServerState&, std::uint64_t) {}

namespace {

RngStream local_stream(const RunContext& ctx, std::uint64_t round,
                       std::size_t client_id) {
  return RngStream(ctx.root_seed,
                   {StreamPurpose::kLocalTrain, round, client_id});
}

FlatParams subtract(const FlatParams& a, const FlatParams& b) {
  require_same_layout(a, b, "subtract");
  FlatParams out{a.layout, a.values};
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

// ---------------------------------------------------------------------------
// Dense LoRA: full download, dense local training, full upload.

class DenseStrategy : public Strategy {
 public:
  StrategyKind kind() const override { return StrategyKind::kDense; }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    FlatParams trained = local_train(*ctx.backbone, state.params, ctx.scaling,
                                     data, ctx.local, stream);
    ClientResult r;
    r.update.delta = subtract(state.params, trained);
    r.update.upload_mask = Mask::ones(state.params.size());
    r.update.example_count = data.size();
    r.update.up_size = message_size(r.update.upload_mask, ctx.size_model);
    r.down = sizes_of(Mask::ones(state.params.size()));
    r.up = sizes_of(r.update.upload_mask);
    return r;
  }
};

// ---------------------------------------------------------------------------
// FLASC: one shared Top-K download mask per round, dense local training,
// independent per-client Top-K upload masks on the deltas.

class FlascStrategy : public Strategy {
 public:
  explicit FlascStrategy(const StrategyConfig& cfg) : cfg_(cfg) {}
  StrategyKind kind() const override { return StrategyKind::kFlasc; }

  void begin_round(const RunContext&, const ServerState& state,
                   std::uint64_t) override {
    // Recomputed from the current dense server params every round.
    down_mask_ = topk_mask(state.params, cfg_.density.down, cfg_.density.scope);
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    const FlatParams downloaded = apply_mask(state.params, down_mask_);
    // Fine-tuning all entries: coordinates outside the download mask arrive
    // as zeros but are trainable.
    FlatParams trained = local_train(*ctx.backbone, downloaded, ctx.scaling,
                                     data, ctx.local, stream);
    FlatParams delta = subtract(downloaded, trained);
    const Mask up_mask = topk_mask(delta, cfg_.density.up, cfg_.density.scope);
    ClientResult r;
    r.update.delta = apply_mask(delta, up_mask);
    r.update.upload_mask = up_mask;
    r.update.example_count = data.size();
    r.update.up_size = message_size(up_mask, ctx.size_model);
    r.down = sizes_of(down_mask_);
    r.up = sizes_of(up_mask);
    return r;
  }

 private:
  StrategyConfig cfg_;
  Mask down_mask_;
};

// ---------------------------------------------------------------------------
// SparseAdapter: one dense warm-up round, one-shot magnitude prune of the
// aggregated weights, then permanently sparse training under the fixed mask.

class SparseAdapterStrategy : public Strategy {
 public:
  explicit SparseAdapterStrategy(const StrategyConfig& cfg) : cfg_(cfg) {}
  StrategyKind kind() const override { return StrategyKind::kSparseAdapter; }

  void begin_round(const RunContext&, const ServerState& state,
                   std::uint64_t round) override {
    trainable_ = round == 0 ? Mask::ones(state.params.size())
                            : trainable_mask(state);
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    ClientResult r;
    if (round == 0) {
      FlatParams trained = local_train(*ctx.backbone, state.params, ctx.scaling,
                                       data, ctx.local, stream);
      r.update.delta = subtract(state.params, trained);
      r.update.upload_mask = Mask::ones(state.params.size());
    } else {
      const FlatParams downloaded = apply_mask(state.params, trainable_);
      FlatParams trained = local_train_masked(*ctx.backbone, downloaded,
                                              ctx.scaling, data, ctx.local,
                                              stream, trainable_);
      r.update.delta = subtract(downloaded, trained);
      r.update.upload_mask = trainable_;
    }
    r.update.example_count = data.size();
    r.update.up_size = message_size(r.update.upload_mask, ctx.size_model);
    r.down = sizes_of(trainable_);
    r.up = sizes_of(r.update.upload_mask);
    return r;
  }

  void end_round(const RunContext&, ServerState& state,
                 std::uint64_t round) override {
    if (round != 0) return;
    const Mask keep =
        topk_mask(state.params, cfg_.density.down, cfg_.density.scope);
    freeze_coordinates(state, keep.complement());
  }

 private:
  StrategyConfig cfg_;
  Mask trainable_;
};

// ---------------------------------------------------------------------------
// Adapter-LTH: iterative magnitude pruning of the trainable set every
// lth_period rounds, continuing training from the pruned state.

class AdapterLthStrategy : public Strategy {
 public:
  explicit AdapterLthStrategy(const StrategyConfig& cfg) : cfg_(cfg) {}
  StrategyKind kind() const override { return StrategyKind::kAdapterLth; }

  void begin_round(const RunContext&, const ServerState& state,
                   std::uint64_t) override {
    trainable_ = trainable_mask(state);
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    const FlatParams downloaded = apply_mask(state.params, trainable_);
    FlatParams trained = local_train_masked(*ctx.backbone, downloaded,
                                            ctx.scaling, data, ctx.local,
                                            stream, trainable_);
    ClientResult r;
    r.update.delta = subtract(downloaded, trained);
    r.update.upload_mask = trainable_;
    r.update.example_count = data.size();
    r.update.up_size = message_size(trainable_, ctx.size_model);
    r.down = sizes_of(trainable_);
    r.up = sizes_of(trainable_);
    return r;
  }

  void end_round(const RunContext&, ServerState& state,
                 std::uint64_t round) override {
    if ((round + 1) % cfg_.lth_period != 0) return;
    const Mask trainable = trainable_mask(state);
    const auto keep_count = static_cast<std::size_t>(
        std::ceil(cfg_.lth_keep * static_cast<double>(trainable.nnz())));
    const Mask kept = topk_within(state.params.values, trainable, keep_count);
    Mask pruned(trainable.size());
    for (std::size_t i = 0; i < trainable.size(); ++i) {
      if (trainable.test(i) && !kept.test(i)) pruned.set(i);
    }
    freeze_coordinates(state, pruned);
  }

 private:
  StrategyConfig cfg_;
  Mask trainable_;
};

// ---------------------------------------------------------------------------
// Federated Select: per-round server-chosen sparse download; clients train
// only the downloaded coordinates, so the upload structure matches download.

class FedSelectStrategy : public Strategy {
 public:
  explicit FedSelectStrategy(const StrategyConfig& cfg) : cfg_(cfg) {}
  StrategyKind kind() const override { return StrategyKind::kFedSelect; }

  void begin_round(const RunContext&, const ServerState& state,
                   std::uint64_t) override {
    mask_ = topk_mask(state.params, cfg_.density.down, cfg_.density.scope);
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    const FlatParams downloaded = apply_mask(state.params, mask_);
    FlatParams trained = local_train_masked(*ctx.backbone, downloaded,
                                            ctx.scaling, data, ctx.local,
                                            stream, mask_);
    ClientResult r;
    r.update.delta = subtract(downloaded, trained);
    r.update.upload_mask = mask_;
    r.update.example_count = data.size();
    r.update.up_size = message_size(mask_, ctx.size_model);
    r.down = sizes_of(mask_);
    r.up = sizes_of(mask_);
    return r;
  }

 private:
  StrategyConfig cfg_;
  Mask mask_;
};

// ---------------------------------------------------------------------------
// Heterogeneous LoRA: clients hold budget tiers; tier b trains a local
// rank-4^b adapter sliced from the global one, and the server zero-pads the
// slice deltas back before a uniform mean.

class HetLoraStrategy : public Strategy {
 public:
  explicit HetLoraStrategy(const StrategyConfig& cfg) : cfg_(cfg) {}
  StrategyKind kind() const override { return StrategyKind::kHetLora; }

  void setup(const RunContext& ctx, const ServerState& state,
             std::size_t n_clients) override {
    const std::size_t global_rank = state.params.layout->rank();
    std::size_t expected = 1;
    for (std::size_t b = 0; b < cfg_.budget_tiers; ++b) expected *= 4;
    if (global_rank != expected) {
      throw std::invalid_argument(
          "hetlora: global rank must be 4^tiers = " + std::to_string(expected) +
          ", got " + std::to_string(global_rank));
    }
    RngStream stream(ctx.root_seed, {StreamPurpose::kBudgetAssign});
    budgets_ = assign_budgets(n_clients, cfg_.budget_tiers, stream);
    tier_layouts_.resize(cfg_.budget_tiers + 1);
    tier_masks_.resize(cfg_.budget_tiers + 1);
    const auto dims = ctx.backbone->layer_dims();
    for (std::size_t b = 1; b <= cfg_.budget_tiers; ++b) {
      std::size_t local_rank = 1;
      for (std::size_t j = 0; j < b; ++j) local_rank *= 4;
      tier_layouts_[b] = std::make_shared<const ParamLayout>(dims, local_rank);
      tier_masks_[b] = hetlora_slice_mask(*state.params.layout, local_rank);
    }
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    const std::size_t tier = budgets_.tier.at(client_id);
    const LayoutPtr& local_layout = tier_layouts_[tier];
    RngStream stream = local_stream(ctx, round, client_id);
    const FlatParams downloaded = hetlora_slice(state.params, local_layout);
    FlatParams trained = local_train(*ctx.backbone, downloaded, ctx.scaling,
                                     data, ctx.local, stream);
    const FlatParams local_delta = subtract(downloaded, trained);
    ClientResult r;
    r.update.delta = hetlora_pad(local_delta, state.params.layout);
    r.update.upload_mask = tier_masks_[tier];
    r.update.example_count = data.size();
    r.update.up_size = message_size(r.update.upload_mask, ctx.size_model);
    r.down = sizes_of(tier_masks_[tier]);
    r.up = sizes_of(tier_masks_[tier]);
    return r;
  }

  const BudgetAssignment& budgets() const { return budgets_; }

 private:
  StrategyConfig cfg_;
  BudgetAssignment budgets_;
  std::vector<LayoutPtr> tier_layouts_;
  std::vector<Mask> tier_masks_;
};

// ---------------------------------------------------------------------------
// FFA-LoRA: A is frozen at initialization for the whole run (broadcast once,
// excluded from per-round accounting); clients train and upload only B.

class FfaLoraStrategy : public Strategy {
 public:
  StrategyKind kind() const override { return StrategyKind::kFfaLora; }

  void setup(const RunContext& ctx, const ServerState&, std::size_t) override {
    b_mask_ = b_segment_mask(*ctx.layout);
  }

  ClientResult run_client(const RunContext& ctx, const ServerState& state,
                          std::uint64_t round, std::size_t client_id,
                          const Dataset& data) const override {
    RngStream stream = local_stream(ctx, round, client_id);
    // The client already holds A from the initial broadcast; only the B
    // segments move each round.
    FlatParams trained = local_train_masked(*ctx.backbone, state.params,
                                            ctx.scaling, data, ctx.local,
                                            stream, b_mask_);
    ClientResult r;
    r.update.delta = subtract(state.params, trained);
    r.update.upload_mask = b_mask_;
    r.update.example_count = data.size();
    r.update.up_size = message_size(b_mask_, ctx.size_model);
    r.down = sizes_of(b_mask_);
    r.up = sizes_of(b_mask_);
    return r;
  }

 private:
  Mask b_mask_;
};

}  // namespace

Mask hetlora_slice_mask(const ParamLayout& global_layout, std::size_t local_rank) {
  const std::size_t rs = global_layout.rank();
  if (local_rank > rs) {
    throw std::invalid_argument("hetlora_slice_mask: local rank exceeds global");
  }
  Mask m(global_layout.total());
  for (const auto& seg : global_layout.segments()) {
    if (!seg.is_b) {
      // A: uppermost local_rank rows.
      for (std::size_t i = 0; i < local_rank; ++i) {
        for (std::size_t j = 0; j < seg.cols; ++j) {
          m.set(seg.offset + i * seg.cols + j);
        }
      }
    } else {
      // B: leftmost local_rank columns.
      for (std::size_t i = 0; i < seg.rows; ++i) {
        for (std::size_t j = 0; j < local_rank; ++j) {
          m.set(seg.offset + i * seg.cols + j);
        }
      }
    }
  }
  return m;
}

FlatParams hetlora_slice(const FlatParams& global_params,
                         const LayoutPtr& local_layout) {
  const ParamLayout& gl = *global_params.layout;
  const ParamLayout& ll = *local_layout;
  if (ll.rank() > gl.rank() || ll.n_layers() != gl.n_layers()) {
    throw std::invalid_argument("hetlora_slice: incompatible layouts");
  }
  FlatParams out{local_layout, std::vector<double>(ll.total())};
  for (std::size_t l = 0; l < gl.n_layers(); ++l) {
    const auto& ga = gl.segment(l, false);
    const auto& la = ll.segment(l, false);
    // A rows are contiguous.
    std::memcpy(out.values.data() + la.offset,
                global_params.values.data() + ga.offset,
                la.length() * sizeof(double));
    const auto& gb = gl.segment(l, true);
    const auto& lb = ll.segment(l, true);
    for (std::size_t i = 0; i < lb.rows; ++i) {
      std::memcpy(out.values.data() + lb.offset + i * lb.cols,
                  global_params.values.data() + gb.offset + i * gb.cols,
                  lb.cols * sizeof(double));
    }
  }
  return out;
}

FlatParams hetlora_pad(const FlatParams& local_params,
                       const LayoutPtr& global_layout) {
  const ParamLayout& ll = *local_params.layout;
  const ParamLayout& gl = *global_layout;
  if (ll.rank() > gl.rank() || ll.n_layers() != gl.n_layers()) {
    throw std::invalid_argument("hetlora_pad: incompatible layouts");
  }
  FlatParams out{global_layout, std::vector<double>(gl.total(), 0.0)};
  for (std::size_t l = 0; l < gl.n_layers(); ++l) {
    const auto& ga = gl.segment(l, false);
    const auto& la = ll.segment(l, false);
    std::memcpy(out.values.data() + ga.offset,
                local_params.values.data() + la.offset,
                la.length() * sizeof(double));
    const auto& gb = gl.segment(l, true);
    const auto& lb = ll.segment(l, true);
    for (std::size_t i = 0; i < lb.rows; ++i) {
      std::memcpy(out.values.data() + gb.offset + i * gb.cols,
                  local_params.values.data() + lb.offset + i * lb.cols,
                  lb.cols * sizeof(double));
    }
  }
  return out;
}

Mask b_segment_mask(const ParamLayout& layout) {
  Mask m(layout.total());
  for (const auto& seg : layout.segments()) {
    if (!seg.is_b) continue;
    for (std::size_t i = 0; i < seg.length(); ++i) m.set(seg.offset + i);
  }
  return m;
}

std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case StrategyKind::kDense: return std::make_unique<DenseStrategy>();
    case StrategyKind::kFlasc: return std::make_unique<FlascStrategy>(cfg);
    case StrategyKind::kSparseAdapter:
      return std::make_unique<SparseAdapterStrategy>(cfg);
    case StrategyKind::kAdapterLth:
      return std::make_unique<AdapterLthStrategy>(cfg);
    case StrategyKind::kFedSelect:
      return std::make_unique<FedSelectStrategy>(cfg);
    case StrategyKind::kHetLora: return std::make_unique<HetLoraStrategy>(cfg);
    case StrategyKind::kFfaLora: return std::make_unique<FfaLoraStrategy>();
  }
  throw std::invalid_argument("make_strategy: unknown kind");
}

}  // namespace flasc
