#pragma once

#include <cstdint>
#include <optional>

#include "gbd/graph.hpp"
#include "gbd/linalg.hpp"

namespace gbd {

/// Polynomial graph filter with dual representations: taps h (length L,
/// optional) and frequency response h~ (length N). The node-domain operator
/// is V diag(h~) V^T, symmetric by construction.
struct GraphFilter {
  EigenBasis basis;
  Vector freq_response;
  std::optional<Vector> taps;  // present only when built from taps

  Matrix node_operator() const {
    return basis.vectors * freq_response.asDiagonal() *
           basis.vectors.transpose();
  }
};

/// Sparse source matrix with an explicit Bernoulli support mask.
struct SparseSignal {
  Matrix x;      // N x P, zero off the support
  Matrix omega;  // 0/1 mask, same shape
  double theta = 0.0;
};

/// Filter from polynomial taps: freq_response = Psi_L h.
GraphFilter filter_from_taps(const EigenBasis& basis,
                             const Eigen::Ref<const Vector>& taps);

/// Filter with a directly specified frequency response (no taps).
GraphFilter filter_from_freq(const EigenBasis& basis,
                             const Eigen::Ref<const Vector>& freq_response);

/// Entrywise-reciprocal filter, valid when min_i |h~_i| >= min_abs.
/// The 1e-3 default keeps the inverse response bounded by 1e3.
GraphFilter inverse_filter(const GraphFilter& f, double min_abs = 1e-3);

struct InversePair {
  Vector g0;  // inverse-filter frequency response, 1^T g0 = n
  Vector h0;  // forward response, g0 o h0 = 1
};

/// Builds g0 = 1_n + alpha * P_1perp b / ||P_1perp b||_2 with b standard
/// normal, so that ||P_1perp g0||_2 = alpha exactly. Draws of b that leave
/// some |g0_i| < 1e-3 are resampled (cap 100).
InversePair controlled_inverse_response(Eigen::Index n, double alpha,
                                        std::uint64_t seed);

/// Bernoulli-Gaussian source: X_ip = Omega_ip gamma_ip / sqrt(theta) with
/// Omega_ip ~ Bernoulli(theta) and gamma_ip ~ Normal(0,1), i.i.d.
SparseSignal sample_bernoulli_gaussian(Eigen::Index n, Eigen::Index p,
                                       double theta, std::uint64_t seed);

/// Y = H X.
Matrix synthesize_observations(const GraphFilter& f, const SparseSignal& x);

}  // namespace gbd
