#pragma once

#include <optional>
#include <vector>

#include "gbd/linalg.hpp"

namespace gbd {

/// Settings for the smoothed convex solver. All values must be positive.
struct BdogConfig {
  double epsilon = 1e-3;       // Huber knee
  int max_iters = 5000;
  double grad_tol = 1e-8;      // stop when ||proj grad|| <= grad_tol*(1+|f|)
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;

  void validate() const;
};

/// Scale-aware Huber knee: 1e-3 times the mean absolute entry of Y.
double default_huber_epsilon(const Eigen::Ref<const Matrix>& y);

struct SolveReport {
  Vector g_hat;
  std::vector<double> objective_trace;  // objective at each iterate
  int iterations = 0;                   // accepted steps taken
  bool converged = false;
  double wall_time_s = 0.0;
};

/// Huber loss: x^2/(2 eps) inside the knee, |x| - eps/2 outside.
double huber(double x, double epsilon);
double huber_deriv(double x, double epsilon);

/// Smoothed surrogate of ||V diag(g) V^T Y||_{1,1}: entrywise Huber loss
/// applied to Z = V diag(g) V^T Y.
double smoothed_objective(const Eigen::Ref<const Vector>& g,
                          const Eigen::Ref<const Matrix>& v,
                          const Eigen::Ref<const Matrix>& y, double epsilon);

/// Gradient of the smoothed objective in g. With D the entrywise Huber
/// derivative of Z, component k equals sum_p (V^T D)_{kp} (V^T Y)_{kp}.
Vector objective_grad_g(const Eigen::Ref<const Vector>& g,
                        const Eigen::Ref<const Matrix>& v,
                        const Eigen::Ref<const Matrix>& y, double epsilon);

/// Minimizes the smoothed objective over the affine set {1^T g = N} by
/// projected gradient descent with a Barzilai-Borwein initial step and an
/// Armijo backtracking line search, accelerated by a periodic jump to the
/// feasible minimizer of the piecewise-quadratic model at the current kink
/// pattern (taken only when it decreases the objective). Cold starts anneal
/// the knee down from the scale-aware default to config.epsilon, warm-
/// starting each stage; the reported trace covers the final stage only.
/// Every iterate stays feasible and the trace is non-increasing. A
/// line-search stall that the model jump cannot improve is reported as
/// converged: for a convex objective, no decrease along the steepest
/// feasible direction certifies numerical optimality.
SolveReport solve_bdog(const Eigen::Ref<const Matrix>& y,
                       const Eigen::Ref<const Matrix>& v,
                       const BdogConfig& config,
                       const std::optional<Vector>& g_init = std::nullopt);

}  // namespace gbd
