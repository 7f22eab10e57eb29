// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/layout.hpp"

#include <stdexcept>
#include <string>

namespace flasc {

ParamLayout::ParamLayout(
    const std::vector<std::pair<std::size_t, std::size_t>>& layer_dims,
    std::size_t rank)
    : rank_(rank) {
  if (rank == 0) {
    throw std::invalid_argument("ParamLayout: rank must be >= 1");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer_dims.size(); ++l) {
    const auto [d, k] = layer_dims[l];
    segments_.push_back({l, false, rank, k, offset});  // A_l: r x k
    offset += rank * k;
    segments_.push_back({l, true, d, rank, offset});  // B_l: d x r
    offset += d * rank;
  }
  total_ = offset;
}

ParamLayout::Coord ParamLayout::coord_of(std::size_t flat) const {
  if (flat >= total_) {
    throw std::out_of_range("ParamLayout::coord_of: index " +
                            std::to_string(flat) + " out of range");
  }
  // Segments are few; linear scan is fine.
  for (const Segment& s : segments_) {
    if (flat < s.offset + s.length()) {
      const std::size_t local = flat - s.offset;
      return {s.layer, s.is_b, local / s.cols, local % s.cols};
    }
  }
  throw std::logic_error("ParamLayout::coord_of: unreachable");
}

std::size_t ParamLayout::flat_of(const Coord& c) const {
  const Segment& s = segment(c.layer, c.is_b);
  if (c.row >= s.rows || c.col >= s.cols) {
    throw std::out_of_range("ParamLayout::flat_of: coord out of range");
  }
  return s.offset + c.row * s.cols + c.col;
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (total_ != other.total_ || rank_ != other.rank_ ||
      segments_.size() != other.segments_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& a = segments_[i];
    const Segment& b = other.segments_[i];
    if (a.layer != b.layer || a.is_b != b.is_b || a.rows != b.rows ||
        a.cols != b.cols || a.offset != b.offset) {
      return false;
    }
  }
  return true;
}

FlatParams zeros_like(const FlatParams& p) {
  return {p.layout, std::vector<double>(p.values.size(), 0.0)};
}

bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

void require_same_layout(const FlatParams& a, const FlatParams& b, const char* what) {
  if (!same_layout(a.layout, b.layout) || a.values.size() != b.values.size()) {
    throw std::invalid_argument(std::string(what) + ": layout mismatch");
  }
}

}  // namespace flasc
