// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace flasc {

void TaskSpec::validate() const {
  if (n_classes < 2) {
    throw std::invalid_argument("task.classes: need at least 2 classes");
  }
  if (feature_dim < 1 || source_size < n_classes ||
      target_train_size < n_classes || target_test_size < 1) {
    throw std::invalid_argument("task: degenerate sizes");
  }
  if (cluster_std < 0.0 || mean_scale < 0.0 || shift < 0.0) {
    throw std::invalid_argument("task: negative scale");
  }
}

namespace {

// Rotate consecutive coordinate pairs by `angle`, then add `shift`.
void apply_shift_transform(std::span<double> x, double angle,
                           std::span<const double> shift) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t j = 0; j + 1 < x.size(); j += 2) {
    const double a = x[j], b = x[j + 1];
    x[j] = c * a - s * b;
    x[j + 1] = s * a + c * b;
  }
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += shift[j];
}

Dataset sample_mixture(const Matrix& means, double cluster_std, std::size_t n,
                       RngStream& stream, double angle,
                       std::span<const double> shift) {
  const std::size_t classes = means.rows();
  const std::size_t dim = means.cols();
  Dataset d;
  d.features = Matrix(n, dim);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % classes;  // balanced classes
    d.labels[i] = static_cast<int>(y);
    auto row = d.features.row(i);
    const auto mu = means.row(y);
    for (std::size_t j = 0; j < dim; ++j) {
      row[j] = mu[j] + cluster_std * stream.next_normal();
    }
    if (angle != 0.0 || !shift.empty()) {
      apply_shift_transform(row, angle, shift);
    }
  }
  return d;
}

}  // namespace

TaskPair gen_task_pair(const TaskSpec& spec, RngStream& stream) {
  spec.validate();
  TaskPair task;
  task.feature_dim = spec.feature_dim;
  task.n_classes = spec.n_classes;

  Matrix means(spec.n_classes, spec.feature_dim);
  for (std::size_t i = 0; i < means.size(); ++i) {
    means.data()[i] = spec.mean_scale * stream.next_normal();
  }
  task.source_means = means;

  // Fixed shift direction drawn once, scaled to the requested norm.
  std::vector<double> shift(spec.feature_dim, 0.0);
  if (spec.shift > 0.0) {
    for (double& x : shift) x = stream.next_normal();
    const double norm = l2_norm(shift);
    if (norm > 0.0) {
      for (double& x : shift) x *= spec.shift / norm;
    }
  }

  task.target_means = means;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    apply_shift_transform(task.target_means.row(c), spec.rotation, shift);
  }

  task.source = sample_mixture(means, spec.cluster_std, spec.source_size,
                               stream, 0.0, {});
  task.target_train = sample_mixture(means, spec.cluster_std,
                                     spec.target_train_size, stream,
                                     spec.rotation, shift);
  task.target_test = sample_mixture(means, spec.cluster_std,
                                    spec.target_test_size, stream,
                                    spec.rotation, shift);
  return task;
}

Backbone train_centralized(const Dataset& data,
                           const std::vector<std::size_t>& hidden,
                           std::size_t n_classes, const PretrainConfig& cfg,
                           RngStream& stream) {
  std::vector<std::size_t> widths;
  widths.push_back(data.dim());
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(n_classes);

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    Matrix w(fan_out, fan_in);
    const double std = cfg.init_std / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) {
      w.data()[i] = std * stream.next_normal();
    }
    layers.push_back({std::move(w), std::vector<double>(fan_out, 0.0)});
  }
  Backbone net(std::move(layers));

  std::vector<Matrix> vel_w;
  std::vector<std::vector<double>> vel_b;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    vel_w.emplace_back(net.layer(l).weight.rows(), net.layer(l).weight.cols());
    vel_b.emplace_back(net.layer(l).bias.size(), 0.0);
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const auto full_accuracy = [&](const Backbone& b) {
    const ForwardResult fr = forward(b, data);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto row = fr.logits.row(i);
      std::size_t best = 0;
      for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;
      }
      if (best == static_cast<std::size_t>(data.labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
  };

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    stream.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const Dataset batch = gather(data, {order.data() + start, len});
      const BackboneGrad g = backbone_backward(net, batch);
      std::vector<DenseLayer> updated;
      updated.reserve(net.n_layers());
      for (std::size_t l = 0; l < net.n_layers(); ++l) {
        DenseLayer layer = net.layer(l);
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
          double& v = vel_w[l].data()[i];
          v = cfg.momentum * v + g.d_weight[l].data()[i];
          layer.weight.data()[i] -= cfg.lr * v;
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
          double& v = vel_b[l][i];
          v = cfg.momentum * v + g.d_bias[l][i];
          layer.bias[i] -= cfg.lr * v;
        }
        updated.push_back(std::move(layer));
      }
      net = Backbone(std::move(updated));
    }
    if (full_accuracy(net) >= cfg.target_accuracy) {
      return net;
    }
  }
  throw std::runtime_error(
      "train_centralized: failed to reach accuracy " +
      std::to_string(cfg.target_accuracy) + " within " +
      std::to_string(cfg.max_epochs) + " epochs (task spec miscalibrated)");
}

Backbone pretrain_backbone(const Dataset& source, const PretrainConfig& cfg,
                           RngStream& stream) {
  return train_centralized(source, cfg.hidden,
                           1 + static_cast<std::size_t>(*std::max_element(
                                   source.labels.begin(), source.labels.end())),
                           cfg, stream);
}

PartitionSpec dirichlet_partition(const std::vector<int>& labels,
                                  std::size_t n_clients, double alpha,
                                  RngStream& stream) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("partition.alpha: must be positive");
  }
  if (n_clients < 1 || n_clients > labels.size()) {
    throw std::invalid_argument("partition.clients: must be in [1, dataset size]");
  }
  const std::size_t n_classes =
      1 + static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()));

  // Per-client label proportions.
  Matrix props(n_clients, n_classes);
  for (std::size_t i = 0; i < n_clients; ++i) {
    const std::vector<double> p = dirichlet_draw(stream, n_classes, alpha);
    std::copy(p.begin(), p.end(), props.row(i).begin());
  }

  PartitionSpec spec;
  spec.alpha = alpha;
  spec.client_indices.resize(n_clients);

  // Assign each class's examples by sampling client slots from the
  // column-normalized proportions.
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> cdf(n_clients, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      total += props.at(i, c);
      cdf[i] = total;
    }
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
      if (static_cast<std::size_t>(labels[idx]) != c) continue;
      std::size_t chosen;
      if (total <= 0.0) {
        chosen = stream.next_below(n_clients);
      } else {
        const double u = stream.next_unit() * total;
        chosen = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (chosen >= n_clients) chosen = n_clients - 1;
      }
      spec.client_indices[chosen].push_back(idx);
    }
  }

  // Non-emptiness repair: move one example from the largest client (ties
  // toward the lower id) to each empty client.
  for (std::size_t i = 0; i < n_clients; ++i) {
    if (!spec.client_indices[i].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t j = 1; j < n_clients; ++j) {
      if (spec.client_indices[j].size() > spec.client_indices[largest].size()) {
        largest = j;
      }
    }
    if (spec.client_indices[largest].size() <= 1) {
      throw std::runtime_error("dirichlet_partition: cannot repair empty client");
    }
    spec.client_indices[i].push_back(spec.client_indices[largest].back());
    spec.client_indices[largest].pop_back();
  }

  for (auto& idx : spec.client_indices) {
    std::sort(idx.begin(), idx.end());
  }
  return spec;
}

void CommLedger::record(std::uint64_t round, std::size_t down, std::size_t up) {
  down_cum_ += down;
  up_cum_ += up;
  entries_.push_back({round, down, up, down_cum_, up_cum_});
}

double comm_time_entry(const CommLedger::Entry& e, const BandwidthModel& bw) {
  if (!(bw.bw_down > 0.0) || !(bw.upload_ratio > 0.0)) {
    throw std::invalid_argument("bandwidth: must be positive");
  }
  return static_cast<double>(e.down) / bw.bw_down +
         static_cast<double>(e.up) / bw.bw_up();
}

double comm_time(const CommLedger& ledger, const BandwidthModel& bw) {
  double total = 0.0;
  for (const auto& e : ledger.entries()) {
    total += comm_time_entry(e, bw);
  }
  return total;
}

void write_dataset_csv(std::ostream& os, const Dataset& d) {
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto row = d.features.row(i);
    for (double x : row) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      os << buf << ',';
    }
    os << d.labels[i] << '\n';
  }
}

void write_partition(std::ostream& os, const PartitionSpec& p) {
  for (std::size_t i = 0; i < p.n_clients(); ++i) {
    os << i << ':';
    for (std::size_t idx : p.client_indices[i]) os << ' ' << idx;
    os << '\n';
  }
}

}  // namespace flasc
