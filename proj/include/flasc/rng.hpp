// Copyright (c) 2026, the flasc-sim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FLASC_RNG_HPP
#define FLASC_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace flasc {

// Every random decision in a run draws from a stream labeled by purpose,
// round and client. Streams are derived by hashing the label into the seed,
// so parallel client execution cannot perturb each other's sequences and any
// single stream can be reconstructed in isolation.
enum class StreamPurpose : std::uint64_t {
  kTaskGen = 1,
  kPretrain = 2,
  kPartition = 3,
  kAdapterInit = 4,
  kBudgetAssign = 5,
  kClientSample = 6,
  kLocalTrain = 7,
  kDpNoise = 8,
};

struct StreamLabel {
  StreamPurpose purpose;
  std::uint64_t round = 0;
  std::uint64_t client = 0;
};

class RngStream {
 public:
  RngStream(std::uint64_t root_seed, StreamLabel label);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in (0, 1].
  double next_unit();

  // Standard normal via Box-Muller on explicitly constructed uniforms; the
  // whole pipeline is pinned so sequences replay bit-exactly.
  double next_normal();

  // Unbiased uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// n i.i.d. draws from N(0, stddev^2). A draw with stddev s is exactly the
// standard draw scaled by s, so stddev = 0 yields zeros.
std::vector<double> gaussian_draw(RngStream& stream, std::size_t n, double stddev);

// Gamma(shape, 1) via Marsaglia-Tsang, with the power boost for shape < 1.
double gamma_draw(RngStream& stream, double shape);

// One draw from Dirichlet(alpha * 1_k): normalized Gamma(alpha) vector.
std::vector<double> dirichlet_draw(RngStream& stream, std::size_t k, double alpha);

}  // namespace flasc

#endif  // FLASC_RNG_HPP
