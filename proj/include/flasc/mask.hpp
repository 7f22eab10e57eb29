// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_MASK_HPP
#define FLASC_MASK_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace flasc {

// Bitset over a FlatParams layout with exact cardinality accounting. The unit
// of sparse communication.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t size) : size_(size), bits_((size + 63) / 64, 0) {}

  static Mask zeros(std::size_t size) { return Mask(size); }
  static Mask ones(std::size_t size);

  std::size_t size() const { return size_; }
  std::size_t nnz() const { return nnz_; }
  double density() const { return size_ == 0 ? 0.0 : static_cast<double>(nnz_) / size_; }

  bool test(std::size_t i) const {
    return (bits_[i >> 6] >> (i & 63)) & 1ULL;
  }

  void set(std::size_t i) {
    std::uint64_t& word = bits_[i >> 6];
    const std::uint64_t bit = 1ULL << (i & 63);
    if (!(word & bit)) {
      word |= bit;
      ++nnz_;
    }
  }

  void reset(std::size_t i) {
    std::uint64_t& word = bits_[i >> 6];
    const std::uint64_t bit = 1ULL << (i & 63);
    if (word & bit) {
      word &= ~bit;
      --nnz_;
    }
  }

  Mask complement() const;
  bool is_subset_of(const Mask& other) const;
  // Set union, in place.
  void merge(const Mask& other);

  bool operator==(const Mask& other) const {
    return size_ == other.size_ && nnz_ == other.nnz_ && bits_ == other.bits_;
  }

 private:
  std::size_t size_ = 0;
  std::size_t nnz_ = 0;
  std::vector<std::uint64_t> bits_;
};

}  // namespace flasc

#endif  // FLASC_MASK_HPP
