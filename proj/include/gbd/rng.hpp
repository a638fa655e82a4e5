#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "gbd/linalg.hpp"

namespace gbd {

/// Deterministic random stream used everywhere in the library.
///
/// The generator is mt19937_64; Gaussians come from an explicit Box-Muller
/// transform of the uniform stream, so the sequence of draws is pinned by
/// this class rather than by the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (two uniforms per draw, cosine branch).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// splitmix64 finalizer; the standard 64-bit avalanche function.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives a child seed from a master seed and an index tuple, so that
/// parallel workers get independent streams in a schedule-free way.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> indices);

/// Matrix with independent standard-normal entries, filled row-major.
Matrix random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Random orthonormal n x n matrix: modified Gram-Schmidt applied to a
/// standard-normal matrix.
Matrix random_orthonormal(Eigen::Index n, Rng& rng);

}  // namespace gbd
