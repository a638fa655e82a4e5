#include "gbd/metrics.hpp"

#include <cmath>

namespace gbd {

double re_g(const Eigen::Ref<const Vector>& g_hat,
            const Eigen::Ref<const Vector>& g0) {
  require_finite(g_hat, "g_hat");
  require_finite(g0, "g0");
  if (g_hat.size() != g0.size()) {
    throw InputError("frequency responses have different lengths");
  }
  const double scale = g0.norm();
  if (!(scale > 0.0)) {
    throw InputError("reference response must be nonzero");
  }
  return (g_hat - g0).norm() / scale;
}

double acc_x(const Eigen::Ref<const Matrix>& x_hat,
             const Eigen::Ref<const Matrix>& x0, double tau) {
  require_finite(x_hat, "x_hat");
  require_finite(x0, "x0");
  if (x_hat.rows() != x0.rows() || x_hat.cols() != x0.cols()) {
    throw InputError("signal estimates have different shapes");
  }
  if (!(tau > 0.0)) {
    throw InputError("support threshold must be > 0");
  }
  const auto true_support = x0.array().abs() > tau;
  const Eigen::Index support_size = true_support.count();
  if (support_size == 0) {
    throw InputError("support accuracy is undefined: no reference entry "
                     "exceeds the threshold");
  }
  const Eigen::Index hits =
      (true_support && (x_hat.array().abs() > tau)).count();
  return static_cast<double>(hits) / static_cast<double>(support_size);
}

double re_operator(const Eigen::Ref<const Matrix>& estimated,
                   const Eigen::Ref<const Matrix>& truth) {
  require_finite(estimated, "estimated");
  require_finite(truth, "truth");
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
    throw InputError("operator estimates have different shapes");
  }
  const double scale = truth.norm();
  if (!(scale > 0.0)) {
    throw InputError("reference operator must be nonzero");
  }
  return (estimated - truth).norm() / scale;
}

Matrix g_operator(const Eigen::Ref<const Matrix>& v_hat,
                  const Eigen::Ref<const Vector>& g_hat) {
  if (v_hat.rows() != v_hat.cols() || v_hat.rows() != g_hat.size()) {
    throw InputError("basis and response dimensions disagree");
  }
  return v_hat * g_hat.asDiagonal() * v_hat.transpose();
}

Matrix h_operator(const Eigen::Ref<const Matrix>& v_hat,
                  const Eigen::Ref<const Vector>& g_hat, double min_abs) {
  if (v_hat.rows() != v_hat.cols() || v_hat.rows() != g_hat.size()) {
    throw InputError("basis and response dimensions disagree");
  }
  if (!(min_abs > 0.0)) {
    throw InputError("clip level must be > 0");
  }
  Vector inv(g_hat.size());
  for (Eigen::Index k = 0; k < g_hat.size(); ++k) {
    const double gk = g_hat(k);
    const double clipped =
        std::abs(gk) < min_abs ? (gk < 0.0 ? -min_abs : min_abs) : gk;
    inv(k) = 1.0 / clipped;
  }
  return v_hat * inv.asDiagonal() * v_hat.transpose();
}

}  // namespace gbd
