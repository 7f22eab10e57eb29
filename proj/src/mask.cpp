// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/mask.hpp"

#include <stdexcept>

namespace flasc {

Mask Mask::ones(std::size_t size) {
  Mask m(size);
  for (std::size_t w = 0; w < m.bits_.size(); ++w) m.bits_[w] = ~0ULL;
  // Clear the tail bits past size.
  if (size % 64 != 0 && !m.bits_.empty()) {
    m.bits_.back() &= (1ULL << (size % 64)) - 1;
  }
  m.nnz_ = size;
  return m;
}

Mask Mask::complement() const {
  Mask m(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    if (!test(i)) m.set(i);
  }
  return m;
}

bool Mask::is_subset_of(const Mask& other) const {
  if (size_ != other.size_) {
    throw std::invalid_argument("Mask::is_subset_of: size mismatch");
  }
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    if (bits_[w] & ~other.bits_[w]) return false;
  }
  return true;
}

void Mask::merge(const Mask& other) {
  if (size_ != other.size_) {
    throw std::invalid_argument("Mask::merge: size mismatch");
  }
  nnz_ = 0;
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    bits_[w] |= other.bits_[w];
    nnz_ += static_cast<std::size_t>(__builtin_popcountll(bits_[w]));
  }
}

}  // namespace flasc
