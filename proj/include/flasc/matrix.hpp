// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_MATRIX_HPP
#define FLASC_MATRIX_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace flasc {

// Dense row-major matrix of doubles. All kernels below fix the accumulation
// order (inner index ascending), so results are bit-reproducible across runs
// and across thread counts.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// c = a * b. OpenMP-parallel over output rows; each output element is
// accumulated serially over the inner index, so the result is independent of
// the thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

// c = a * b^T (b stored row-major, so this reads both operands contiguously).
Matrix matmul_bt(const Matrix& a, const Matrix& b);

// c = a^T * b.
Matrix matmul_at(const Matrix& a, const Matrix& b);

// Serial reference kernels, kept for the parallel-vs-serial equivalence tests
// and the benchmark tool.
Matrix matmul_serial(const Matrix& a, const Matrix& b);
Matrix matmul_bt_serial(const Matrix& a, const Matrix& b);
Matrix matmul_at_serial(const Matrix& a, const Matrix& b);

// sqrt(sum v_i^2), accumulated in ascending index order. Non-finite input is
// a hard error.
double l2_norm(std::span<const double> v);

// Central finite differences, (f(x + h e_i) - f(x - h e_i)) / 2h. Test oracle
// for analytic gradients; not used on any production path.
std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& loss_fn,
    std::span<const double> params, double h);

}  // namespace flasc

#endif  // FLASC_MATRIX_HPP
