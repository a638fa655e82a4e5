#pragma once

#include <cstdint>

#include "gbd/graph.hpp"
#include "gbd/linalg.hpp"

namespace gbd {

/// Random skew-symmetric matrix with unit Frobenius norm: strictly-upper
/// entries standard normal, antisymmetrized as (B - B^T)/2, then normalized.
Matrix random_unit_skew(Eigen::Index n, std::uint64_t seed);

/// Applies the parameterized Cayley transform to an orthonormal basis:
/// V_p = (I + xi W)^{-1} (I - xi W) V. The result is orthonormal for any
/// xi >= 0 and skew W.
Matrix cayley_perturb(const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& w, double xi);

/// Closed-form ||V - V_p||_F for the Cayley perturbation:
/// sqrt(sum_k 4 mu_k^2 xi^2 / (1 + mu_k^2 xi^2)), where {i mu_k} are the
/// eigenvalues of W. The mu_k^2 are read off the symmetric PSD matrix W^T W,
/// keeping the computation real.
double predicted_delta_norm(const Eigen::Ref<const Matrix>& w, double xi);

/// Inverts the closed form above by bisection on xi in [0, 1e6]; the norm is
/// strictly increasing in xi. Targets above the bracket's supremum are
/// rejected.
double xi_for_target_delta(const Eigen::Ref<const Matrix>& w,
                           double target_delta, double tol);

/// Eigenbasis estimated by diagonalizing the sample covariance
/// C_y = Y Y^T / (P - 1). Eigenvectors are ordered by descending eigenvalue
/// of C_y (stable on ties, so Y = I yields the identity basis).
EigenBasis covariance_eigenbasis(const Eigen::Ref<const Matrix>& y);

}  // namespace gbd
