#include "gbd/rbdogs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace gbd {

namespace {

constexpr double kBetaFloor = 1e-12;

}  // namespace

void RbdogsConfig::validate() const {
  if (!(rho > 0.0)) {
    throw InputError("proximity weight rho must be > 0");
  }
  if (!(delta_stop > 0.0)) {
    throw InputError("delta_stop must be > 0");
  }
  if (max_outer < 1) {
    throw InputError("max_outer must be >= 1");
  }
  if (!(ortho_refresh_tol > 0.0)) {
    throw InputError("ortho_refresh_tol must be > 0");
  }
  inner_config().validate();
}

BdogConfig RbdogsConfig::inner_config() const {
  BdogConfig inner;
  inner.epsilon = epsilon;
  inner.max_iters = inner_max_iters;
  inner.grad_tol = inner_grad_tol;
  inner.armijo_c = armijo_c;
  inner.armijo_shrink = armijo_shrink;
  return inner;
}

double default_proximity_weight(const Eigen::Ref<const Matrix>& y) {
  require_finite(y, "y");
  const double n = static_cast<double>(y.rows());
  const double weight = norm_1_1(y) / (n * n);
  if (!(weight > 0.0)) {
    throw InputError("cannot pick a proximity weight for an all-zero "
                     "observation");
  }
  return weight;
}

double full_objective(const Eigen::Ref<const Vector>& g,
                      const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& v_p,
                      const Eigen::Ref<const Matrix>& y, double epsilon,
                      double rho) {
  return smoothed_objective(g, v, y, epsilon) +
         0.5 * rho * (v - v_p).squaredNorm();
}

Matrix euclidean_grad_v(const Eigen::Ref<const Vector>& g,
                        const Eigen::Ref<const Matrix>& v,
                        const Eigen::Ref<const Matrix>& v_p,
                        const Eigen::Ref<const Matrix>& y, double epsilon,
                        double rho) {
  const Matrix z = v * (g.asDiagonal() * (v.transpose() * y));
  const Matrix d =
      z.unaryExpr([epsilon](double x) { return huber_deriv(x, epsilon); });
  return (d * y.transpose() + y * d.transpose()) * v * g.asDiagonal() +
         rho * (v - v_p);
}

Matrix cayley_step(const Eigen::Ref<const Matrix>& v,
                   const Eigen::Ref<const Matrix>& grad, double beta) {
  const Eigen::Index n = v.rows();
  const Matrix m = grad * v.transpose() - v * grad.transpose();
  const Matrix lhs = Matrix::Identity(n, n) + 0.5 * beta * m;
  const Matrix rhs =
      (Matrix::Identity(n, n) - 0.5 * beta * m) * v;
  return solve_linear(lhs, rhs);
}

RbdogsReport rbdogs(const Eigen::Ref<const Matrix>& y,
                    const Eigen::Ref<const Matrix>& v_p,
                    const RbdogsConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  require_finite(y, "y");
  require_finite(v_p, "v_p");
  if (v_p.rows() != v_p.cols() || v_p.rows() != y.rows()) {
    throw InputError("perturbed basis must be square and match Y's rows");
  }
  const Eigen::Index n = v_p.rows();
  const double ortho =
      (v_p.transpose() * v_p - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (ortho > 1e-6) {
    throw InputError("perturbed basis is not orthonormal: max |V^T V - I| = " +
                     std::to_string(ortho));
  }

  const BdogConfig inner = config.inner_config();
  Matrix v = v_p;
  Vector g = Vector::Ones(n);

  RbdogsReport report;
  report.max_ortho_error = ortho;
  report.full_objective_trace.push_back(
      full_objective(g, v, v_p, y, config.epsilon, config.rho));

  for (int outer = 0; outer < config.max_outer; ++outer) {
    const Vector g_prev = g;
    const Matrix v_prev = v;

    g = solve_bdog(y, v, inner, g).g_hat;

    const Matrix grad =
        euclidean_grad_v(g, v, v_p, y, config.epsilon, config.rho);
    const Matrix m = grad * v.transpose() - v * grad.transpose();
    const double m_sq = m.squaredNorm();
    if (m_sq > 0.0) {
      const double f_cur =
          full_objective(g, v, v_p, y, config.epsilon, config.rho);
      double beta = 1.0 / (1.0 + grad.norm());
      while (beta >= kBetaFloor) {
        const Matrix v_try = cayley_step(v, grad, beta);
        const double f_try =
            full_objective(g, v_try, v_p, y, config.epsilon, config.rho);
        if (f_try <= f_cur - 0.5 * config.armijo_c * beta * m_sq) {
          v = v_try;
          break;
        }
        beta *= config.armijo_shrink;
      }
      // Exhausted line search leaves the basis unchanged for this sweep.
    }
    const double drift =
        (v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    report.max_ortho_error = std::max(report.max_ortho_error, drift);
    if (drift > config.ortho_refresh_tol) {
      modified_gram_schmidt(v);
    }

    report.full_objective_trace.push_back(
        full_objective(g, v, v_p, y, config.epsilon, config.rho));
    report.outer_iterations = outer + 1;

    if ((g - g_prev).norm() <= config.delta_stop &&
        (v - v_prev).norm() <= config.delta_stop) {
      report.converged = true;
      break;
    }
  }

  report.g_hat = g;
  report.v_hat = v;
  report.x_hat = v * (g.asDiagonal() * (v.transpose() * y));
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

}  // namespace gbd
