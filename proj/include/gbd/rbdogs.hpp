#pragma once

#include <vector>

#include "gbd/bdog.hpp"
#include "gbd/linalg.hpp"

namespace gbd {

/// Settings for the robust alternating solver. rho weights the proximity
/// penalty (rho/2)||V - V_p||_F^2 that anchors the basis update.
struct RbdogsConfig {
  double rho = 1.0;
  double epsilon = 1e-3;         // Huber knee shared with the inner solver
  // Joint stopping tolerance for the g and V block moves per sweep. Basis
  // corrections worth making move V by ~5e-2 per sweep; once both blocks
  // move less than this the remaining descent only polishes the objective's
  // flat directions, so the sweep loop cuts off there.
  double delta_stop = 0.03;
  int max_outer = 200;
  int inner_max_iters = 5000;
  double inner_grad_tol = 1e-8;
  double armijo_c = 1e-4;        // line search on the basis block
  double armijo_shrink = 0.5;
  double ortho_refresh_tol = 1e-9;

  void validate() const;
  BdogConfig inner_config() const;
};

/// Scale-aware proximity weight: ||Y||_{1,1} / N^2.
double default_proximity_weight(const Eigen::Ref<const Matrix>& y);

struct RbdogsReport {
  Vector g_hat;
  Matrix v_hat;
  Matrix x_hat;                     // V diag(g) V^T Y at the final iterate
  std::vector<double> full_objective_trace;
  int outer_iterations = 0;
  bool converged = false;
  double max_ortho_error = 0.0;     // worst |V^T V - I| over all iterates
  double wall_time_s = 0.0;
};

/// Smoothed objective plus the proximity penalty:
/// f(g, V) + (rho/2) ||V - V_p||_F^2.
double full_objective(const Eigen::Ref<const Vector>& g,
                      const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& v_p,
                      const Eigen::Ref<const Matrix>& y, double epsilon,
                      double rho);

/// Euclidean gradient of the full objective in V. With D the entrywise Huber
/// derivative of Z = V diag(g) V^T Y, this is
/// (D Y^T + Y D^T) V diag(g) + rho (V - V_p).
Matrix euclidean_grad_v(const Eigen::Ref<const Vector>& g,
                        const Eigen::Ref<const Matrix>& v,
                        const Eigen::Ref<const Matrix>& v_p,
                        const Eigen::Ref<const Matrix>& y, double epsilon,
                        double rho);

/// One Cayley-retracted descent step on the orthogonal manifold:
/// M = G V^T - V G^T, V+ = (I + (beta/2) M)^{-1} (I - (beta/2) M) V.
/// The update preserves orthonormality for any beta.
Matrix cayley_step(const Eigen::Ref<const Matrix>& v,
                   const Eigen::Ref<const Matrix>& grad, double beta);

/// Alternating minimization: an exact inner solve for g at fixed V, then one
/// Armijo-controlled Cayley descent step in V at fixed g, starting from the
/// perturbed basis V_p. Stops when both blocks move less than delta_stop.
RbdogsReport rbdogs(const Eigen::Ref<const Matrix>& y,
                    const Eigen::Ref<const Matrix>& v_p,
                    const RbdogsConfig& config);

}  // namespace gbd
