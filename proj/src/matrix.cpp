// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace flasc {

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length " +
                                std::to_string(data_.size()) + " != " +
                                std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        cd[i * n + j] += av * bd[p * n + j];
      }
    }
  }
  return c;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        cd[i * n + j] += av * bd[p * n + j];
      }
    }
  }
  return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_bt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += ad[i * k + p] * bd[j * k + p];
      }
      cd[i * n + j] = acc;
    }
  }
  return c;
}

Matrix matmul_bt_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_bt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += ad[i * k + p] * bd[j * k + p];
      }
      cd[i * n + j] = acc;
    }
  }
  return c;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += ad[p * m + i] * bd[p * n + j];
      }
      cd[i * n + j] = acc;
    }
  }
  return c;
}

Matrix matmul_at_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Matrix c(m, n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += ad[p * m + i] * bd[p * n + j];
      }
      cd[i * n + j] = acc;
    }
  }
  return c;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("l2_norm: non-finite input");
    }
    acc += x * x;
  }
  return std::sqrt(acc);
}

std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& loss_fn,
    std::span<const double> params, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: h must be positive");
  }
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = loss_fn(x);
    x[i] = orig - h;
    const double fm = loss_fn(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace flasc
