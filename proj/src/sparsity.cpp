// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace flasc {

namespace {

void check_density(double d) {
  if (!(d > 0.0) || d > 1.0) {
    throw std::invalid_argument("topk_mask: density must be in (0, 1]");
  }
}

// Selects the `keep` indices with largest |values| from `candidates`,
// breaking magnitude ties toward the lower index. The comparator is a total
// order, which makes top-k selection monotone in k.
void select_topk(std::vector<std::size_t>& candidates,
                 std::span<const double> values, std::size_t keep, Mask& out) {
  if (keep == 0) return;
  const auto larger = [&](std::size_t i, std::size_t j) {
    const double ai = std::abs(values[i]);
    const double aj = std::abs(values[j]);
    if (ai != aj) return ai > aj;
    return i < j;
  };
  if (keep < candidates.size()) {
    std::nth_element(candidates.begin(), candidates.begin() + keep - 1,
                     candidates.end(), larger);
  }
  for (std::size_t i = 0; i < std::min(keep, candidates.size()); ++i) {
    out.set(candidates[i]);
  }
}

}  // namespace

std::size_t topk_count(double density, std::size_t n) {
  check_density(density);
  const auto k = static_cast<std::size_t>(
      std::ceil(density * static_cast<double>(n)));
  return std::min(k, n);
}

Mask topk_mask(const FlatParams& v, double density, SparsityScope scope) {
  check_density(density);
  Mask mask(v.size());
  if (scope == SparsityScope::kGlobal) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    select_topk(idx, v.values, topk_count(density, v.size()), mask);
  } else {
    for (const auto& seg : v.layout->segments()) {
      std::vector<std::size_t> idx(seg.length());
      std::iota(idx.begin(), idx.end(), seg.offset);
      select_topk(idx, v.values, topk_count(density, seg.length()), mask);
    }
  }
  return mask;
}

Mask topk_within(std::span<const double> values, const Mask& within,
                 std::size_t keep) {
  if (within.size() != values.size()) {
    throw std::invalid_argument("topk_within: size mismatch");
  }
  std::vector<std::size_t> idx;
  idx.reserve(within.nnz());
  for (std::size_t i = 0; i < within.size(); ++i) {
    if (within.test(i)) idx.push_back(i);
  }
  Mask mask(values.size());
  select_topk(idx, values, std::min(keep, idx.size()), mask);
  return mask;
}

FlatParams apply_mask(const FlatParams& v, const Mask& m) {
  if (m.size() != v.size()) {
    throw std::invalid_argument("apply_mask: layout mismatch");
  }
  FlatParams out{v.layout, std::vector<double>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.values[i] = m.test(i) ? v.values[i] : 0.0;
  }
  return out;
}

std::size_t message_size(const Mask& m, const SizeModel& model) {
  switch (model.mode) {
    case SizeMode::kParamCount:
      return m.nnz();
    case SizeMode::kByteExact:
      return (m.size() + 7) / 8 + 4 * m.nnz();
  }
  return 0;
}

}  // namespace flasc
