#include "gbd/filters.hpp"

#include <cmath>
#include <string>

#include "gbd/rng.hpp"

namespace gbd {

GraphFilter filter_from_taps(const EigenBasis& basis,
                             const Eigen::Ref<const Vector>& taps) {
  const Eigen::Index n = basis.size();
  const Eigen::Index l = taps.size();
  if (l < 1 || l > n) {
    throw InputError("filter_from_taps: tap count must be in [1, N]");
  }
  require_finite(taps, "filter_from_taps");
  GraphFilter f;
  f.basis = basis;
  f.freq_response = vandermonde(basis.eigenvalues, l) * taps;
  f.taps = taps;
  return f;
}

GraphFilter filter_from_freq(const EigenBasis& basis,
                             const Eigen::Ref<const Vector>& freq_response) {
  if (freq_response.size() != basis.size()) {
    throw InputError("filter_from_freq: response length != N");
  }
  require_finite(freq_response, "filter_from_freq");
  GraphFilter f;
  f.basis = basis;
  f.freq_response = freq_response;
  return f;
}

GraphFilter inverse_filter(const GraphFilter& f, double min_abs) {
  for (Eigen::Index i = 0; i < f.freq_response.size(); ++i) {
    if (std::abs(f.freq_response(i)) < min_abs) {
      throw NumericalError("inverse_filter: |h~_" + std::to_string(i) +
                           "| = " + std::to_string(std::abs(f.freq_response(i))) +
                           " below floor " + std::to_string(min_abs));
    }
  }
  GraphFilter g;
  g.basis = f.basis;
  g.freq_response = f.freq_response.cwiseInverse();
  return g;
}

InversePair controlled_inverse_response(Eigen::Index n, double alpha,
                                        std::uint64_t seed) {
  if (n < 1) throw InputError("controlled_inverse_response: n must be >= 1");
  if (alpha < 0.0) {
    throw InputError("controlled_inverse_response: alpha must be >= 0");
  }
  constexpr double kMinAbs = 1e-3;
  constexpr int kMaxResamples = 100;

  Rng rng(seed);
  Vector g0;
  if (alpha == 0.0) {
    g0 = Vector::Ones(n);
  } else {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
      Vector b(n);
      for (Eigen::Index i = 0; i < n; ++i) b(i) = rng.normal();
      Vector dir = project_ones_complement(b);
      const double dn = dir.norm();
      if (dn == 0.0) continue;
      g0 = Vector::Ones(n) + (alpha / dn) * dir;
      if (g0.cwiseAbs().minCoeff() >= kMinAbs) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw NumericalError(
          "controlled_inverse_response: no invertible draw in 100 attempts");
    }
  }
  return InversePair{g0, g0.cwiseInverse()};
}

SparseSignal sample_bernoulli_gaussian(Eigen::Index n, Eigen::Index p,
                                       double theta, std::uint64_t seed) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InputError("sample_bernoulli_gaussian: theta must be in (0, 1)");
  }
  Rng rng(seed);
  SparseSignal s;
  s.theta = theta;
  s.x = Matrix::Zero(n, p);
  s.omega = Matrix::Zero(n, p);
  const double scale = 1.0 / std::sqrt(theta);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (rng.bernoulli(theta)) {
        s.omega(i, j) = 1.0;
        s.x(i, j) = scale * rng.normal();
      }
    }
  }
  return s;
}

Matrix synthesize_observations(const GraphFilter& f, const SparseSignal& x) {
  if (x.x.rows() != f.basis.size()) {
    throw InputError("synthesize_observations: dimension mismatch");
  }
  return f.node_operator() * x.x;
}

}  // namespace gbd
