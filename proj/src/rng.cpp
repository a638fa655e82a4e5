#include "gbd/rng.hpp"

namespace gbd {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t idx : indices) {
    h = splitmix64(h ^ (idx + 0x9e3779b97f4a7c15ull));
  }
  return h;
}

Matrix random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng.normal();
    }
  }
  return m;
}

Matrix random_orthonormal(Eigen::Index n, Rng& rng) {
  Matrix m = random_gaussian_matrix(n, n, rng);
  modified_gram_schmidt(m);
  return m;
}

}  // namespace gbd
