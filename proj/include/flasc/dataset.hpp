// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_DATASET_HPP
#define FLASC_DATASET_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "flasc/matrix.hpp"

namespace flasc {

// Labeled examples; features are one row per example.
struct Dataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

// Gather the given rows into a contiguous batch.
Dataset gather(const Dataset& d, std::span<const std::size_t> indices);

}  // namespace flasc

#endif  // FLASC_DATASET_HPP
