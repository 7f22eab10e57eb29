// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_LAYOUT_HPP
#define FLASC_LAYOUT_HPP

#include <cstddef>
#include <memory>
#include <vector>

namespace flasc {

// Flat addressing of all trainable adapter entries. Segments are ordered
// (layer 0, A), (layer 0, B), ..., (layer L-1, A), (layer L-1, B), each
// row-major.
class ParamLayout {
 public:
  struct Segment {
    std::size_t layer;
    bool is_b;  // false: A (r x k), true: B (d x r)
    std::size_t rows;
    std::size_t cols;
    std::size_t offset;
    std::size_t length() const { return rows * cols; }
  };

  struct Coord {
    std::size_t layer;
    bool is_b;
    std::size_t row;
    std::size_t col;
  };

  // layer_dims[l] = {d_l, k_l} of the adapted weight W_l (d x k).
  ParamLayout(const std::vector<std::pair<std::size_t, std::size_t>>& layer_dims,
              std::size_t rank);

  std::size_t total() const { return total_; }
  std::size_t rank() const { return rank_; }
  std::size_t n_layers() const { return segments_.size() / 2; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(std::size_t layer, bool is_b) const {
    return segments_[2 * layer + (is_b ? 1 : 0)];
  }

  Coord coord_of(std::size_t flat) const;
  std::size_t flat_of(const Coord& c) const;

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
  std::size_t rank_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

// A flat vector of all trainable adapter entries plus its layout.
struct FlatParams {
  LayoutPtr layout;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

FlatParams zeros_like(const FlatParams& p);

// Layouts match if they are the same object or structurally equal.
bool same_layout(const LayoutPtr& a, const LayoutPtr& b);
void require_same_layout(const FlatParams& a, const FlatParams& b, const char* what);

}  // namespace flasc

#endif  // FLASC_LAYOUT_HPP
