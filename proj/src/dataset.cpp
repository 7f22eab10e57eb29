// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/dataset.hpp"

#include <cstring>

namespace flasc {

Dataset gather(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.features = Matrix(indices.size(), d.features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = d.features.row(indices[i]);
    std::memcpy(out.features.row(i).data(), src.data(),
                src.size() * sizeof(double));
    out.labels.push_back(d.labels[indices[i]]);
  }
  return out;
}

}  // namespace flasc
