// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0
//
// Compares the OpenMP kernels against the serial references: matmul at a few
// sizes, then one FLASC client phase at 1 thread vs all threads. Also checks
// that parallel and serial results agree bit-exactly.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>
#include <omp.h>

#include "flasc/config.hpp"
#include "flasc/round.hpp"
#include "flasc/runner.hpp"

using namespace flasc;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& stream) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = stream.next_normal();
  return m;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", omp_get_max_threads());

  RngStream stream(7, {StreamPurpose::kTaskGen});
  std::printf("%-24s %12s %12s %8s\n", "kernel", "serial ms", "omp ms", "equal");
  for (std::size_t n : {128, 256, 512}) {
    const Matrix a = random_matrix(n, n, stream);
    const Matrix b = random_matrix(n, n, stream);
    Matrix cs, cp;
    const double ts = time_ms([&] { cs = matmul_serial(a, b); }, 3);
    const double tp = time_ms([&] { cp = matmul(a, b); }, 3);
    const bool equal = cs.data() == cp.data();
    std::printf("matmul %4zux%-4zu          %12.3f %12.3f %8s\n", n, n, ts, tp,
                equal ? "yes" : "NO");
  }

  // One round of FLASC client work on the default desk setup, 1 thread vs all.
  ExperimentConfig cfg = parse_config(
      "strategy=flasc\ndensity.down=0.25\ndensity.up=0.25\nrounds=1\n"
      "task.source_size=4000\npretrain.max_epochs=60\nseed=3\n");
  RngStream task_stream(cfg.seed, {StreamPurpose::kTaskGen});
  const TaskPair task = gen_task_pair(cfg.task, task_stream);
  RngStream pre_stream(cfg.seed, {StreamPurpose::kPretrain});
  const Backbone backbone = train_centralized(task.source, cfg.pretrain.hidden,
                                              cfg.task.n_classes, cfg.pretrain,
                                              pre_stream);
  RngStream part_stream(cfg.seed, {StreamPurpose::kPartition});
  const PartitionSpec partition = dirichlet_partition(
      task.target_train.labels, cfg.n_clients, cfg.alpha, part_stream);
  std::vector<Dataset> client_data;
  for (const auto& idx : partition.client_indices) {
    client_data.push_back(gather(task.target_train, idx));
  }
  const LayoutPtr layout = make_layout(backbone, cfg.lora_rank);
  RngStream init_stream(cfg.seed, {StreamPurpose::kAdapterInit});
  const FlatParams p0 = flatten(
      init_lora(backbone, cfg.lora_rank, cfg.lora_init_std, cfg.lora_scaling,
                init_stream),
      layout);

  RunContext ctx;
  ctx.backbone = &backbone;
  ctx.layout = layout;
  ctx.scaling = cfg.lora_scaling;
  ctx.local = cfg.local;
  ctx.size_model = cfg.size_model;
  ctx.root_seed = cfg.seed;
  RoundConfig rcfg;
  rcfg.fedopt = cfg.fedopt;
  rcfg.clients_per_round = cfg.cohort;

  const auto run_once = [&] {
    ServerState state = ServerState::init(p0);
    auto strategy = make_strategy(cfg.strategy);
    strategy->setup(ctx, state, cfg.n_clients);
    run_round(*strategy, state, ctx, client_data, 0, rcfg);
    return state.params.values;
  };

  omp_set_num_threads(1);
  std::vector<double> serial_params;
  const double t1 = time_ms([&] { serial_params = run_once(); }, 3);
  omp_set_num_threads(omp_get_num_procs());
  std::vector<double> parallel_params;
  const double tn = time_ms([&] { parallel_params = run_once(); }, 3);

  std::printf("\nflasc round, %zu clients    1 thread: %.3f ms   %d threads: "
              "%.3f ms   equal: %s\n",
              cfg.cohort, t1, omp_get_max_threads(), tn,
              serial_params == parallel_params ? "yes" : "NO");
  return serial_params == parallel_params ? 0 : 1;
}
