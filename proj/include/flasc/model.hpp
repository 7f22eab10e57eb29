// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_MODEL_HPP
#define FLASC_MODEL_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "flasc/dataset.hpp"
#include "flasc/layout.hpp"
#include "flasc/mask.hpp"
#include "flasc/matrix.hpp"
#include "flasc/rng.hpp"

namespace flasc {

struct DenseLayer {
  Matrix weight;             // d x k (outputs x inputs)
  std::vector<double> bias;  // d
};

// Frozen feed-forward classifier: tanh between layers, raw logits at the end.
// Immutable after construction.
class Backbone {
 public:
  explicit Backbone(std::vector<DenseLayer> layers);

  std::size_t n_layers() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t l) const { return layers_[l]; }
  std::size_t input_dim() const { return layers_.front().weight.cols(); }
  std::size_t output_dim() const { return layers_.back().weight.rows(); }

  // {d_l, k_l} per layer; adapters attach to every weight matrix.
  std::vector<std::pair<std::size_t, std::size_t>> layer_dims() const;

 private:
  std::vector<DenseLayer> layers_;
};

// Low-rank adapter: per layer A_l (r x k) and B_l (d x r); the adapted layer
// computes W x + scaling * B (A x). B starts at zero so the adapted model
// initially equals the backbone.
struct LoraAdapter {
  std::vector<Matrix> a;
  std::vector<Matrix> b;
  std::size_t rank = 0;
  double scaling = 1.0;
};

struct LocalTrainConfig {
  double lr = 0.15;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
};

LayoutPtr make_layout(const Backbone& backbone, std::size_t rank);

LoraAdapter init_lora(const Backbone& backbone, std::size_t rank, double init_std,
                      double scaling, RngStream& stream);

FlatParams flatten(const LoraAdapter& adapter, const LayoutPtr& layout);
LoraAdapter unflatten(const FlatParams& params, double scaling);

struct ForwardResult {
  Matrix logits;  // batch x classes
  double loss;    // mean cross-entropy
};

ForwardResult forward(const Backbone& backbone, const LoraAdapter& adapter,
                      const Dataset& batch);
ForwardResult forward(const Backbone& backbone, const Dataset& batch);

// Gradient of the mean cross-entropy with respect to every A_l, B_l entry.
// The backbone is frozen and receives no gradient.
FlatParams lora_backward(const Backbone& backbone, const LoraAdapter& adapter,
                         const LayoutPtr& layout, const Dataset& batch);

// New frozen backbone with W_l' = W_l + scaling * B_l A_l.
Backbone merge(const Backbone& backbone, const LoraAdapter& adapter);

// Mini-batch SGD with momentum over the adapter parameters; every coordinate
// is trainable. Batches are reshuffled per epoch from the given stream.
FlatParams local_train(const Backbone& backbone, const FlatParams& params,
                       double scaling, const Dataset& data,
                       const LocalTrainConfig& cfg, RngStream& stream);

// Same, but the gradient is multiplied by grad_mask at every step;
// coordinates outside the mask never change.
FlatParams local_train_masked(const Backbone& backbone, const FlatParams& params,
                              double scaling, const Dataset& data,
                              const LocalTrainConfig& cfg, RngStream& stream,
                              const Mask& grad_mask);

// Full-model gradients, used only for pretraining the backbone (and as a
// oracle cross-check); federated training never touches these.
struct BackboneGrad {
  std::vector<Matrix> d_weight;
  std::vector<std::vector<double>> d_bias;
};
BackboneGrad backbone_backward(const Backbone& backbone, const Dataset& batch);

}  // namespace flasc

#endif  // FLASC_MODEL_HPP
