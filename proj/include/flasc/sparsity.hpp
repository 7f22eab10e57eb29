// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_SPARSITY_HPP
#define FLASC_SPARSITY_HPP

#include <cstddef>
#include <span>

#include "flasc/layout.hpp"
#include "flasc/mask.hpp"

namespace flasc {

enum class SparsityScope { kGlobal, kLayerwise };

struct DensityConfig {
  double down = 1.0;
  double up = 1.0;
  SparsityScope scope = SparsityScope::kGlobal;
};

// Number of entries a Top-K mask keeps: ceil(d * n), so nnz >= 1 whenever
// n >= 1 and d > 0.
std::size_t topk_count(double density, std::size_t n);

// Mask of the top ceil(d*n) entries by magnitude, ties broken toward the
// lower flat index. Layerwise scope applies the same rule to each layout
// segment (every A_l and B_l) separately.
Mask topk_mask(const FlatParams& v, double density, SparsityScope scope);

// Top-k restricted to the set bits of `within`: keeps the `keep` largest
// |values| among them, same tie rule. Used by the pruning strategies.
Mask topk_within(std::span<const double> values, const Mask& within,
                 std::size_t keep);

// Elementwise product with the 0/1 mask (masked-out entries become exact
// zeros).
FlatParams apply_mask(const FlatParams& v, const Mask& m);

enum class SizeMode { kParamCount, kByteExact };

// Communicated-size accounting. Param-count mode reports nnz, the unit the
// utility-vs-communication comparisons are made in. Byte-exact mode charges
// a bitmap index plus 32-bit values: ceil(length/8) + 4*nnz bytes.
struct SizeModel {
  SizeMode mode = SizeMode::kParamCount;
};

std::size_t message_size(const Mask& m, const SizeModel& model);

}  // namespace flasc

#endif  // FLASC_SPARSITY_HPP
