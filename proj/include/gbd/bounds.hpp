#pragma once

#include <optional>

#include "gbd/linalg.hpp"

namespace gbd {

/// Constants entering the recovery threshold and the stability bound. The
/// sigma_i are probabilistic slack parameters with theta-dependent admissible
/// ranges; c1 is the unspecified universal constant of the stability bound
/// and sigma_q the direction-alignment parameter inside Q (nullopt asks for
/// the worst case over a grid).
struct BoundParams {
  double theta = 0.15;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.1;
  double sigma4 = 0.1;
  double delta_prob = 0.05;
  double c1 = 1.0;
  std::optional<double> sigma_q;  // nullopt = worst case over sigma in [0,1]

  /// sigma1, sigma2 at their admissible upper limits for the given theta,
  /// sigma3 = sigma4 = 0.1, delta_prob = 0.05, c1 = 1, worst-case sigma_q.
  static BoundParams defaults_for_theta(double theta);

  void validate() const;
};

struct A0Result {
  double value = 0.0;
  // True when (1 - sigma1) - 2 theta (1 + sigma2) <= 0, which forces the
  // threshold to zero regardless of the basis.
  bool bracket_nonpositive = false;
};

/// Recovery threshold
/// a0 = sqrt(1 - sigma_max^2(U~)) [(1-s1) - 2 theta (1+s2)] (1-s4)
///      / ((1+s3) sqrt(theta)),
/// clamped at zero. U~ is the row-demeaned elementwise square of V.
A0Result recovery_threshold_a0(const Eigen::Ref<const Matrix>& v,
                               const BoundParams& params);

struct RecoveryCheck {
  bool holds = false;
  double lhs = 0.0;  // ||P_1perp g0||_2
  double rhs = 0.0;  // a0
};

/// Exact-recovery condition: ||P_1perp g0||_2 <= a0.
RecoveryCheck exact_recovery_check(const Eigen::Ref<const Vector>& g0,
                                   const Eigen::Ref<const Matrix>& v,
                                   const BoundParams& params);

/// Equivalent additive data perturbation induced by the basis error
/// Delta = V - V_p:
///   E = (V - Delta) [Delta^T - diag(g0) Delta^T H0] X0,  H0 = V diag(h0) V^T.
/// For orthonormal V and V_p and a reciprocal pair (g0 .* h0 = 1), it holds
/// exactly that V_p diag(g0) V_p^T Y = X0 + E with Y = H0 X0.
Matrix error_matrix_e(const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& v_p,
                      const Eigen::Ref<const Vector>& g0,
                      const Eigen::Ref<const Vector>& h0,
                      const Eigen::Ref<const Matrix>& x0);

/// Restriction of E to the complement of the support mask: entries where
/// omega == 1 are zeroed, entries where omega == 0 pass through.
Matrix restrict_complement(const Eigen::Ref<const Matrix>& e,
                           const Eigen::Ref<const Matrix>& omega);

/// The factor Q = c1 sqrt(theta) (sqrt(a0^2 - (1-sigma)^2 alpha^2)
/// - sigma alpha) with alpha = ||P_1perp g0||_2, evaluated at params.sigma_q
/// or minimized over a 1001-point grid on [0,1] when sigma_q is unset.
/// Returns nullopt when alpha > a0 (the recovery condition fails and Q is
/// undefined).
std::optional<double> q_factor(const Eigen::Ref<const Vector>& g0, double a0,
                               const BoundParams& params);

struct StabilityBound {
  std::optional<double> bound;  // nullopt = infeasible (denominator <= 0)
  double numerator = 0.0;
  double denominator = 0.0;
};

/// Worst-case estimation error of the perturbed convex program:
///   2 sigma_max(diag(g0) - g0 g0^T / N) ||E_comp||_{1,1}
///   / (P Q - a0 ||E_comp||_{1,1} - ||E_comp^T V (.) V||_{1->2}),
/// where (.) is the column-wise Khatri-Rao product. A non-positive
/// denominator means the perturbation is too large for the bound to apply.
StabilityBound stability_bound(const Eigen::Ref<const Vector>& g0,
                               const Eigen::Ref<const Matrix>& e_comp,
                               const Eigen::Ref<const Matrix>& v, double a0,
                               double q, Eigen::Index p_samples);

struct TolerableDelta {
  double bound = 0.0;  // +infinity when m1 * m2 = 0
  double m1 = 0.0;
  double m2 = 0.0;
};

/// Largest tolerable ||Delta||_F along the unit-Frobenius direction
/// delta_dir: P Q / (M1 M2), where M2 = ||[D^T - diag(g0) D^T H0] X0||_F for
/// D = delta_dir and M1 is evaluated on the normalized off-support part of
/// the induced error matrix. The support mask is the nonzero pattern of x0.
/// The bound is +infinity when M1 M2 = 0.
TolerableDelta tolerable_delta_details(const Eigen::Ref<const Vector>& g0,
                                       const Eigen::Ref<const Vector>& h0,
                                       const Eigen::Ref<const Matrix>& x0,
                                       const Eigen::Ref<const Matrix>& v,
                                       const Eigen::Ref<const Matrix>& delta_dir,
                                       double a0, double q,
                                       Eigen::Index p_samples);

double tolerable_delta_bound(const Eigen::Ref<const Vector>& g0,
                             const Eigen::Ref<const Vector>& h0,
                             const Eigen::Ref<const Matrix>& x0,
                             const Eigen::Ref<const Matrix>& v,
                             const Eigen::Ref<const Matrix>& delta_dir,
                             double a0, double q, Eigen::Index p_samples);

/// Relative residual of the change-of-variables identity at a general g:
/// || V_p diag(g) V_p^T Y - V diag(g .* h0) V^T (X0 + E) ||_F / ||X0||_F.
/// Exact (residual ~ 1e-15) at g = g0; measured, not asserted, elsewhere.
double general_identity_residual(const Eigen::Ref<const Vector>& g,
                                 const Eigen::Ref<const Matrix>& v,
                                 const Eigen::Ref<const Matrix>& v_p,
                                 const Eigen::Ref<const Vector>& g0,
                                 const Eigen::Ref<const Vector>& h0,
                                 const Eigen::Ref<const Matrix>& x0);

/// Reported (never enforced) sample-size threshold c' sigma_m^{-2} ln(4 /
/// delta_prob) with sigma_m = min(sigma1, ..., sigma4).
double min_sample_size(const BoundParams& params, double c_prime);

}  // namespace gbd
