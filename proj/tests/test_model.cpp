// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flasc/model.hpp"
#include "oracles.hpp"

using namespace flasc;

namespace {

Backbone random_backbone(const std::vector<std::size_t>& widths,
                         RngStream& stream, double scale = 0.6) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Matrix w = oracles::random_matrix(widths[l + 1], widths[l], scale, stream);
    std::vector<double> bias(widths[l + 1]);
    for (auto& b : bias) b = 0.1 * stream.next_normal();
    layers.push_back({std::move(w), std::move(bias)});
  }
  return Backbone(std::move(layers));
}

Dataset random_batch(std::size_t n, std::size_t dim, std::size_t classes,
                     RngStream& stream) {
  Dataset d;
  d.features = oracles::random_matrix(n, dim, 1.0, stream);
  d.labels.resize(n);
  for (auto& y : d.labels) y = static_cast<int>(stream.next_below(classes));
  return d;
}

// Adapter with random nonzero B, for generic-gradient instances.
LoraAdapter random_adapter(const Backbone& bb, std::size_t rank, double scaling,
                           RngStream& stream) {
  LoraAdapter ad = init_lora(bb, rank, 0.1, scaling, stream);
  for (auto& b : ad.b) {
    for (auto& x : b.data()) x = 0.1 * stream.next_normal();
  }
  return ad;
}

}  // namespace

TEST_CASE("init_lora: B=0 makes the adapted forward equal the backbone") {
  RngStream s(1, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({6, 9, 4}, s);
  const LoraAdapter ad = init_lora(bb, 3, 0.02, 1.0, s);
  const Dataset batch = random_batch(5, 6, 4, s);
  const ForwardResult adapted = forward(bb, ad, batch);
  const ForwardResult plain = forward(bb, batch);
  CHECK(adapted.logits.data() == plain.logits.data());
  CHECK(adapted.loss == plain.loss);
}

TEST_CASE("init_lora: flat length is sum of r*(d_l + k_l)") {
  RngStream s(2, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({32, 64, 64, 10}, s);
  const LayoutPtr layout = make_layout(bb, 16);
  CHECK(layout->total() == 16 * (32 + 64) + 16 * (64 + 64) + 16 * (64 + 10));
  CHECK(layout->total() == 4768);
  const LoraAdapter ad = init_lora(bb, 16, 0.02, 1.0, s);
  CHECK(flatten(ad, layout).size() == 4768);
}

TEST_CASE("init_lora: equal (seed, label) replays identical A entries") {
  RngStream s0(3, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({5, 7, 3}, s0);
  RngStream sa(4, {StreamPurpose::kAdapterInit});
  RngStream sb(4, {StreamPurpose::kAdapterInit});
  const LoraAdapter a = init_lora(bb, 2, 0.02, 1.0, sa);
  const LoraAdapter b = init_lora(bb, 2, 0.02, 1.0, sb);
  for (std::size_t l = 0; l < a.a.size(); ++l) {
    CHECK(a.a[l].data() == b.a[l].data());
  }
}

TEST_CASE("init_lora: rank exceeding every layer dimension is a hard error") {
  RngStream s(5, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({6, 9, 4}, s);
  CHECK_THROWS(init_lora(bb, 10, 0.02, 1.0, s));
  CHECK_NOTHROW(init_lora(bb, 9, 0.02, 1.0, s));
}

TEST_CASE("layout: flat index and coordinate round-trip bijectively") {
  RngStream s(6, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({5, 8, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  for (std::size_t i = 0; i < layout->total(); ++i) {
    CHECK(layout->flat_of(layout->coord_of(i)) == i);
  }
}

TEST_CASE("forward: identity composition on a single layer") {
  // W=0, s=1, B and A identity-padded, x=e1: output is e1 (single layer =
  // logits layer, no activation).
  std::vector<DenseLayer> layers;
  layers.push_back({Matrix(3, 3), std::vector<double>(3, 0.0)});
  const Backbone bb(std::move(layers));
  LoraAdapter ad;
  ad.rank = 3;
  ad.scaling = 1.0;
  ad.a.push_back(Matrix::identity(3));
  ad.b.push_back(Matrix::identity(3));
  Dataset batch;
  batch.features = Matrix(1, 3, {1, 0, 0});
  batch.labels = {0};
  const ForwardResult fr = forward(bb, ad, batch);
  CHECK(fr.logits.at(0, 0) == 1.0);
  CHECK(fr.logits.at(0, 1) == 0.0);
  CHECK(fr.logits.at(0, 2) == 0.0);
}

TEST_CASE("backward: duplicating every example leaves the mean gradient unchanged") {
  RngStream s(7, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 6, 3}, s);
  const LoraAdapter ad = random_adapter(bb, 2, 1.0, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const Dataset batch = random_batch(3, 4, 3, s);
  Dataset doubled;
  doubled.features = Matrix(6, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto src = batch.features.row(i % 3);
    std::copy(src.begin(), src.end(), doubled.features.row(i).begin());
    doubled.labels.push_back(batch.labels[i % 3]);
  }
  const FlatParams g1 = lora_backward(bb, ad, layout, batch);
  const FlatParams g2 = lora_backward(bb, ad, layout, doubled);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1.values[i] == doctest::Approx(g2.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward: B=0 instance matches finite differences") {
  RngStream s(8, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({5, 7, 4}, s);
  const LoraAdapter ad = init_lora(bb, 3, 0.2, 1.0, s);  // B stays 0
  const LayoutPtr layout = make_layout(bb, 3);
  const Dataset batch = random_batch(2, 5, 4, s);
  const FlatParams flat = flatten(ad, layout);

  const auto loss_fn = [&](std::span<const double> x) {
    FlatParams p{layout, {x.begin(), x.end()}};
    return forward(bb, unflatten(p, 1.0), batch).loss;
  };
  const auto fd = finite_diff_grad(loss_fn, flat.values, 1e-5);
  const FlatParams analytic = lora_backward(bb, ad, layout, batch);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    max_rel = std::max(max_rel, oracles::rel_err(analytic.values[i], fd[i]));
  }
  CHECK(max_rel < 1e-4);

  // With B=0 the A gradient vanishes by the chain rule.
  for (std::size_t l = 0; l < layout->n_layers(); ++l) {
    const auto& seg = layout->segment(l, false);
    for (std::size_t i = 0; i < seg.length(); ++i) {
      CHECK(analytic.values[seg.offset + i] == 0.0);
    }
  }
}

TEST_CASE("backward: 20 random instances match finite differences to 1e-4") {
  RngStream s(9, {StreamPurpose::kAdapterInit});
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t in = 3 + inst % 4;
    const std::size_t hid = 4 + inst % 3;
    const std::size_t classes = 3 + inst % 3;
    const std::size_t rank = 1 + inst % 3;
    const Backbone bb = random_backbone({in, hid, classes}, s);
    const LoraAdapter ad = random_adapter(bb, rank, 0.7, s);
    const LayoutPtr layout = make_layout(bb, rank);
    const Dataset batch = random_batch(2 + inst % 3, in, classes, s);
    const FlatParams flat = flatten(ad, layout);
    const auto loss_fn = [&](std::span<const double> x) {
      FlatParams p{layout, {x.begin(), x.end()}};
      return forward(bb, unflatten(p, 0.7), batch).loss;
    };
    const auto fd = finite_diff_grad(loss_fn, flat.values, 1e-5);
    const FlatParams analytic = lora_backward(bb, ad, layout, batch);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      max_rel = std::max(max_rel, oracles::rel_err(analytic.values[i], fd[i]));
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("merge: B=0 reproduces the backbone bit-exactly") {
  RngStream s(10, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LoraAdapter ad = init_lora(bb, 2, 0.1, 1.0, s);
  const Backbone merged = merge(bb, ad);
  for (std::size_t l = 0; l < bb.n_layers(); ++l) {
    CHECK(merged.layer(l).weight.data() == bb.layer(l).weight.data());
    CHECK(merged.layer(l).bias == bb.layer(l).bias);
  }
}

TEST_CASE("merge: rank-1 outer product on a 2x2 layer by hand") {
  std::vector<DenseLayer> layers;
  layers.push_back({Matrix(2, 2, {1, 2, 3, 4}), {0, 0}});
  const Backbone bb(std::move(layers));
  LoraAdapter ad;
  ad.rank = 1;
  ad.scaling = 2.0;
  ad.a.push_back(Matrix(1, 2, {5, 6}));
  ad.b.push_back(Matrix(2, 1, {7, 8}));
  const Backbone merged = merge(bb, ad);
  // W' = W + 2 * [7;8][5 6]
  CHECK(merged.layer(0).weight.at(0, 0) == 1 + 2 * 35);
  CHECK(merged.layer(0).weight.at(0, 1) == 2 + 2 * 42);
  CHECK(merged.layer(0).weight.at(1, 0) == 3 + 2 * 40);
  CHECK(merged.layer(0).weight.at(1, 1) == 4 + 2 * 48);
}

TEST_CASE("merge equivalence: 100 random instances within 1e-10 relative") {
  RngStream s(11, {StreamPurpose::kAdapterInit});
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t in = 3 + inst % 5;
    const std::size_t hid = 4 + inst % 4;
    const std::size_t classes = 2 + inst % 4;
    const std::size_t rank = 1 + inst % 3;
    const Backbone bb = random_backbone({in, hid, classes}, s);
    const LoraAdapter ad = random_adapter(bb, rank, 1.3, s);
    const Dataset batch = random_batch(3, in, classes, s);
    const ForwardResult adapted = forward(bb, ad, batch);
    const ForwardResult merged = forward(merge(bb, ad), batch);
    for (std::size_t i = 0; i < adapted.logits.size(); ++i) {
      const double a = adapted.logits.data()[i];
      const double m = merged.logits.data()[i];
      CHECK(std::abs(a - m) <= 1e-10 * std::max({std::abs(a), std::abs(m), 1.0}));
    }
  }
}

TEST_CASE("local_train: lr=0 returns the input bit-exactly") {
  RngStream s(12, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 6, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(10, 4, 3, s);
  RngStream train(13, {StreamPurpose::kLocalTrain, 0, 0});
  const FlatParams out =
      local_train(bb, p, 1.0, data, {0.0, 0.9, 4, 2}, train);
  CHECK(out.values == p.values);
}

TEST_CASE("local_train: one example, one step, momentum 0 is P - lr*grad") {
  RngStream s(14, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const LoraAdapter ad = random_adapter(bb, 2, 1.0, s);
  const FlatParams p = flatten(ad, layout);
  const Dataset data = random_batch(1, 4, 3, s);
  const FlatParams g = lora_backward(bb, ad, layout, data);
  RngStream train(15, {StreamPurpose::kLocalTrain, 0, 0});
  const FlatParams out = local_train(bb, p, 1.0, data, {0.05, 0.0, 16, 1}, train);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(out.values[i] == p.values[i] - 0.05 * g.values[i]);
  }
}

TEST_CASE("local_train: two epochs with momentum match the scripted recursion") {
  RngStream s(16, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p0 = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(7, 4, 3, s);
  const LocalTrainConfig cfg{0.03, 0.9, 3, 2};

  RngStream train(17, {StreamPurpose::kLocalTrain, 1, 2});
  const FlatParams got = local_train(bb, p0, 1.0, data, cfg, train);

  // Reference: replay the same shuffles and recompute the momentum recursion
  // step by step.
  RngStream replay(17, {StreamPurpose::kLocalTrain, 1, 2});
  std::vector<double> p = p0.values;
  oracles::RefMomentumSgd sgd(cfg.lr, cfg.momentum, p.size());
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    replay.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const Dataset batch = gather(data, {order.data() + start, len});
      const FlatParams cur{layout, p};
      const FlatParams g =
          lora_backward(bb, unflatten(cur, 1.0), layout, batch);
      sgd.step(p, g.values);
    }
  }
  CHECK(got.values == p);
}

TEST_CASE("local_train: backbone is byte-identical before and after") {
  RngStream s(18, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  std::vector<std::vector<double>> before;
  for (std::size_t l = 0; l < bb.n_layers(); ++l) {
    before.push_back(bb.layer(l).weight.data());
  }
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(8, 4, 3, s);
  RngStream train(19, {StreamPurpose::kLocalTrain, 0, 0});
  local_train(bb, p, 1.0, data, {0.1, 0.9, 4, 3}, train);
  for (std::size_t l = 0; l < bb.n_layers(); ++l) {
    CHECK(bb.layer(l).weight.data() == before[l]);
  }
}

TEST_CASE("local_train_masked: all-ones mask equals local_train bit-exactly") {
  RngStream s(20, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(9, 4, 3, s);
  RngStream t1(21, {StreamPurpose::kLocalTrain, 0, 0});
  RngStream t2(21, {StreamPurpose::kLocalTrain, 0, 0});
  const LocalTrainConfig cfg{0.05, 0.9, 4, 2};
  const FlatParams dense = local_train(bb, p, 1.0, data, cfg, t1);
  const FlatParams masked = local_train_masked(bb, p, 1.0, data, cfg, t2,
                                               Mask::ones(p.size()));
  CHECK(dense.values == masked.values);
}

TEST_CASE("local_train_masked: all-zeros mask returns the input") {
  RngStream s(22, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(6, 4, 3, s);
  RngStream train(23, {StreamPurpose::kLocalTrain, 0, 0});
  const FlatParams out = local_train_masked(bb, p, 1.0, data, {0.1, 0.9, 4, 2},
                                            train, Mask::zeros(p.size()));
  CHECK(out.values == p.values);
}

TEST_CASE("local_train_masked: coordinates outside the mask never change") {
  RngStream s(24, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(random_adapter(bb, 2, 1.0, s), layout);
  const Dataset data = random_batch(6, 4, 3, s);
  Mask mask(p.size());
  RngStream pick(25, {StreamPurpose::kPartition});
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (pick.next_below(2) == 0) mask.set(i);
  }
  RngStream train(26, {StreamPurpose::kLocalTrain, 0, 0});
  const FlatParams out =
      local_train_masked(bb, p, 1.0, data, {0.1, 0.9, 4, 2}, train, mask);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.test(i)) CHECK(out.values[i] == p.values[i]);
  }
}

TEST_CASE("local_train: empty dataset is a hard error") {
  RngStream s(27, {StreamPurpose::kAdapterInit});
  const Backbone bb = random_backbone({4, 5, 3}, s);
  const LayoutPtr layout = make_layout(bb, 2);
  const FlatParams p = flatten(init_lora(bb, 2, 0.02, 1.0, s), layout);
  Dataset empty;
  empty.features = Matrix(0, 4);
  RngStream train(28, {StreamPurpose::kLocalTrain, 0, 0});
  CHECK_THROWS(local_train(bb, p, 1.0, empty, {0.1, 0.9, 4, 1}, train));
}
