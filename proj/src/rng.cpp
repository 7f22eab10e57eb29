// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "flasc/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flasc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, const StreamLabel& label) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ static_cast<std::uint64_t>(label.purpose));
  h = splitmix64(h ^ label.round);
  h = splitmix64(h ^ label.client);
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, StreamLabel label)
    : engine_(derive_seed(root_seed, label)) {}

double RngStream::next_unit() {
  // 53-bit mantissa, shifted into (0, 1].
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("next_below: bound must be positive");
  }
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

std::vector<double> gaussian_draw(RngStream& stream, std::size_t n, double stddev) {
  if (stddev < 0.0) {
    throw std::invalid_argument("gaussian_draw: stddev must be >= 0");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = stream.next_normal() * stddev;
  }
  return out;
}

double gamma_draw(RngStream& stream, double shape) {
  if (!(shape > 0.0)) {
    throw std::invalid_argument("gamma_draw: shape must be positive");
  }
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double g = gamma_draw(stream, shape + 1.0);
    const double u = stream.next_unit();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = stream.next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = stream.next_unit();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> dirichlet_draw(RngStream& stream, std::size_t k, double alpha) {
  std::vector<double> p(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = gamma_draw(stream, alpha);
    total += p[i];
  }
  if (total <= 0.0 || !std::isfinite(total)) {
    // All gammas underflowed (tiny alpha): fall back to a single spike,
    // which is the alpha -> 0 limit of the Dirichlet.
    const std::size_t spike = stream.next_below(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = (i == spike) ? 1.0 : 0.0;
    return p;
  }
  for (std::size_t i = 0; i < k; ++i) p[i] /= total;
  return p;
}

}  // namespace flasc
