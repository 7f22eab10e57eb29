// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

namespace flasc {

namespace {

void check_batch(const Backbone& backbone, const Dataset& batch) {
  if (batch.size() == 0) {
    throw std::invalid_argument("forward: empty batch");
  }
  if (batch.features.cols() != backbone.input_dim()) {
    throw std::invalid_argument("forward: feature dim " +
                                std::to_string(batch.features.cols()) +
                                " != input dim " +
                                std::to_string(backbone.input_dim()));
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= backbone.output_dim()) {
      throw std::invalid_argument("forward: label out of range");
    }
  }
}

Matrix tanh_of(const Matrix& z) {
  Matrix h(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    h.data()[i] = std::tanh(z.data()[i]);
  }
  return h;
}

void add_bias_rows(Matrix& z, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) r[j] += bias[j];
  }
}

// Activations of every layer plus the per-layer A-projections needed by the
// adapter backward pass. acts[0] is the input batch, acts[l+1] the output of
// layer l (tanh applied except for the last layer).
struct Trace {
  std::vector<Matrix> acts;
  std::vector<Matrix> a_proj;  // U_l = H_{l-1} A_l^T, only when adapted
};

Trace run_forward(const Backbone& backbone, const LoraAdapter* adapter,
                  const Dataset& batch) {
  Trace t;
  t.acts.reserve(backbone.n_layers() + 1);
  t.acts.push_back(batch.features);
  if (adapter != nullptr) t.a_proj.resize(backbone.n_layers());
  for (std::size_t l = 0; l < backbone.n_layers(); ++l) {
    const DenseLayer& layer = backbone.layer(l);
    Matrix z = matmul_bt(t.acts.back(), layer.weight);
    add_bias_rows(z, layer.bias);
    if (adapter != nullptr) {
      Matrix u = matmul_bt(t.acts.back(), adapter->a[l]);
      Matrix bu = matmul_bt(u, adapter->b[l]);
      for (std::size_t i = 0; i < z.size(); ++i) {
        z.data()[i] += adapter->scaling * bu.data()[i];
      }
      t.a_proj[l] = std::move(u);
    }
    t.acts.push_back(l + 1 < backbone.n_layers() ? tanh_of(z) : std::move(z));
  }
  return t;
}

// Mean cross-entropy and its logits gradient, computed with the usual
// log-sum-exp stabilization.
double softmax_ce(const Matrix& logits, const std::vector<int>& labels,
                  Matrix* grad_out) {
  const std::size_t n = logits.rows(), c = logits.cols();
  double total = 0.0;
  if (grad_out != nullptr) *grad_out = Matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    double zmax = z[0];
    for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - z[static_cast<std::size_t>(labels[i])];
    if (grad_out != nullptr) {
      auto g = grad_out->row(i);
      for (std::size_t j = 0; j < c; ++j) {
        g[j] = std::exp(z[j] - lse) / static_cast<double>(n);
      }
      g[static_cast<std::size_t>(labels[i])] -= 1.0 / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

void copy_into(Matrix& dst, const double* src) {
  std::memcpy(dst.data().data(), src, dst.size() * sizeof(double));
}

void load_adapter(LoraAdapter& adapter, const ParamLayout& layout,
                  const std::vector<double>& values) {
  for (std::size_t l = 0; l < layout.n_layers(); ++l) {
    copy_into(adapter.a[l], values.data() + layout.segment(l, false).offset);
    copy_into(adapter.b[l], values.data() + layout.segment(l, true).offset);
  }
}

}  // namespace

Backbone::Backbone(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw std::invalid_argument("Backbone: no layers");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) {
      throw std::invalid_argument("Backbone: bias length mismatch at layer " +
                                  std::to_string(l));
    }
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw std::invalid_argument("Backbone: layer dims do not chain at layer " +
                                  std::to_string(l));
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> Backbone::layer_dims() const {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  dims.reserve(layers_.size());
  for (const DenseLayer& l : layers_) {
    dims.emplace_back(l.weight.rows(), l.weight.cols());
  }
  return dims;
}

LayoutPtr make_layout(const Backbone& backbone, std::size_t rank) {
  return std::make_shared<const ParamLayout>(backbone.layer_dims(), rank);
}

LoraAdapter init_lora(const Backbone& backbone, std::size_t rank, double init_std,
                      double scaling, RngStream& stream) {
  if (rank < 1) {
    throw std::invalid_argument("init_lora: rank must be >= 1");
  }
  for (const auto& [d, k] : backbone.layer_dims()) {
    if (rank > std::max(d, k)) {
      throw std::invalid_argument("init_lora: rank " + std::to_string(rank) +
                                  " exceeds layer dimension " +
                                  std::to_string(std::max(d, k)));
    }
  }
  LoraAdapter adapter;
  adapter.rank = rank;
  adapter.scaling = scaling;
  for (const auto& [d, k] : backbone.layer_dims()) {
    Matrix a(rank, k);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.data()[i] = stream.next_normal() * init_std;
    }
    adapter.a.push_back(std::move(a));
    adapter.b.emplace_back(d, rank);  // zero-initialized
  }
  return adapter;
}

FlatParams flatten(const LoraAdapter& adapter, const LayoutPtr& layout) {
  FlatParams p{layout, std::vector<double>(layout->total())};
  for (std::size_t l = 0; l < layout->n_layers(); ++l) {
    const auto& sa = layout->segment(l, false);
    const auto& sb = layout->segment(l, true);
    std::memcpy(p.values.data() + sa.offset, adapter.a[l].data().data(),
                sa.length() * sizeof(double));
    std::memcpy(p.values.data() + sb.offset, adapter.b[l].data().data(),
                sb.length() * sizeof(double));
  }
  return p;
}

LoraAdapter unflatten(const FlatParams& params, double scaling) {
  const ParamLayout& layout = *params.layout;
  LoraAdapter adapter;
  adapter.rank = layout.rank();
  adapter.scaling = scaling;
  for (std::size_t l = 0; l < layout.n_layers(); ++l) {
    const auto& sa = layout.segment(l, false);
    const auto& sb = layout.segment(l, true);
    Matrix a(sa.rows, sa.cols);
    Matrix b(sb.rows, sb.cols);
    copy_into(a, params.values.data() + sa.offset);
    copy_into(b, params.values.data() + sb.offset);
    adapter.a.push_back(std::move(a));
    adapter.b.push_back(std::move(b));
  }
  return adapter;
}

ForwardResult forward(const Backbone& backbone, const LoraAdapter& adapter,
                      const Dataset& batch) {
  check_batch(backbone, batch);
  Trace t = run_forward(backbone, &adapter, batch);
  ForwardResult r;
  r.logits = std::move(t.acts.back());
  r.loss = softmax_ce(r.logits, batch.labels, nullptr);
  return r;
}

ForwardResult forward(const Backbone& backbone, const Dataset& batch) {
  check_batch(backbone, batch);
  Trace t = run_forward(backbone, nullptr, batch);
  ForwardResult r;
  r.logits = std::move(t.acts.back());
  r.loss = softmax_ce(r.logits, batch.labels, nullptr);
  return r;
}

FlatParams lora_backward(const Backbone& backbone, const LoraAdapter& adapter,
                         const LayoutPtr& layout, const Dataset& batch) {
  check_batch(backbone, batch);
  const double s = adapter.scaling;
  Trace t = run_forward(backbone, &adapter, batch);

  Matrix g;  // dL/dZ_l, starting at the logits layer
  softmax_ce(t.acts.back(), batch.labels, &g);

  FlatParams grad{layout, std::vector<double>(layout->total())};
  for (std::size_t l = backbone.n_layers(); l-- > 0;) {
    const Matrix& h_prev = t.acts[l];
    const Matrix v = matmul(g, adapter.b[l]);       // batch x r
    Matrix db = matmul_at(g, t.a_proj[l]);          // d x r
    Matrix da = matmul_at(v, h_prev);               // r x k
    for (auto& x : db.data()) x *= s;
    for (auto& x : da.data()) x *= s;
    const auto& sa = layout->segment(l, false);
    const auto& sb = layout->segment(l, true);
    std::memcpy(grad.values.data() + sa.offset, da.data().data(),
                sa.length() * sizeof(double));
    std::memcpy(grad.values.data() + sb.offset, db.data().data(),
                sb.length() * sizeof(double));
    if (l == 0) break;
    Matrix dh = matmul(g, backbone.layer(l).weight);  // batch x k
    const Matrix va = matmul(v, adapter.a[l]);
    for (std::size_t i = 0; i < dh.size(); ++i) {
      dh.data()[i] += s * va.data()[i];
    }
    // Through the tanh.
    g = Matrix(dh.rows(), dh.cols());
    for (std::size_t i = 0; i < dh.size(); ++i) {
      const double h = h_prev.data()[i];
      g.data()[i] = dh.data()[i] * (1.0 - h * h);
    }
  }
  return grad;
}

BackboneGrad backbone_backward(const Backbone& backbone, const Dataset& batch) {
  check_batch(backbone, batch);
  Trace t = run_forward(backbone, nullptr, batch);

  Matrix g;
  softmax_ce(t.acts.back(), batch.labels, &g);

  BackboneGrad grad;
  grad.d_weight.resize(backbone.n_layers());
  grad.d_bias.resize(backbone.n_layers());
  for (std::size_t l = backbone.n_layers(); l-- > 0;) {
    const Matrix& h_prev = t.acts[l];
    grad.d_weight[l] = matmul_at(g, h_prev);  // d x k
    std::vector<double> db(g.cols(), 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const auto r = g.row(i);
      for (std::size_t j = 0; j < g.cols(); ++j) db[j] += r[j];
    }
    grad.d_bias[l] = std::move(db);
    if (l == 0) break;
    Matrix dh = matmul(g, backbone.layer(l).weight);
    g = Matrix(dh.rows(), dh.cols());
    for (std::size_t i = 0; i < dh.size(); ++i) {
      const double h = h_prev.data()[i];
      g.data()[i] = dh.data()[i] * (1.0 - h * h);
    }
  }
  return grad;
}

Backbone merge(const Backbone& backbone, const LoraAdapter& adapter) {
  std::vector<DenseLayer> merged;
  merged.reserve(backbone.n_layers());
  for (std::size_t l = 0; l < backbone.n_layers(); ++l) {
    const DenseLayer& layer = backbone.layer(l);
    Matrix delta = matmul(adapter.b[l], adapter.a[l]);
    Matrix w = layer.weight;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w.data()[i] += adapter.scaling * delta.data()[i];
    }
    merged.push_back({std::move(w), layer.bias});
  }
  return Backbone(std::move(merged));
}

namespace {

FlatParams train_impl(const Backbone& backbone, const FlatParams& params,
                      double scaling, const Dataset& data,
                      const LocalTrainConfig& cfg, RngStream& stream,
                      const Mask* grad_mask) {
  if (data.size() == 0) {
    throw std::invalid_argument("local_train: empty dataset");
  }
  if (!(cfg.lr >= 0.0) || cfg.momentum < 0.0 || cfg.momentum >= 1.0 ||
      cfg.batch_size < 1 || cfg.epochs < 1) {
    throw std::invalid_argument("local_train: invalid config");
  }
  if (grad_mask != nullptr && grad_mask->size() != params.size()) {
    throw std::invalid_argument("local_train: mask size mismatch");
  }

  std::vector<double> p = params.values;
  std::vector<double> vel(p.size(), 0.0);
  LoraAdapter adapter = unflatten(params, scaling);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    stream.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      Dataset batch = gather(data, {order.data() + start, len});
      FlatParams g = lora_backward(backbone, adapter, params.layout, batch);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi =
            (grad_mask == nullptr || grad_mask->test(i)) ? g.values[i] : 0.0;
        vel[i] = cfg.momentum * vel[i] + gi;
        p[i] -= cfg.lr * vel[i];
      }
      load_adapter(adapter, *params.layout, p);
    }
  }
  return {params.layout, std::move(p)};
}

}  // namespace

FlatParams local_train(const Backbone& backbone, const FlatParams& params,
                       double scaling, const Dataset& data,
                       const LocalTrainConfig& cfg, RngStream& stream) {
  return train_impl(backbone, params, scaling, data, cfg, stream, nullptr);
}

FlatParams local_train_masked(const Backbone& backbone, const FlatParams& params,
                              double scaling, const Dataset& data,
                              const LocalTrainConfig& cfg, RngStream& stream,
                              const Mask& grad_mask) {
  return train_impl(backbone, params, scaling, data, cfg, stream, &grad_mask);
}

}  // namespace flasc
