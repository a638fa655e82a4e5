#include "gbd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gbd/graph.hpp"

namespace gbd {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_orthonormal(const Eigen::Ref<const Matrix>& v, const char* name,
                         double tol) {
  if (v.rows() != v.cols()) {
    throw InputError(std::string(name) + " must be square");
  }
  const Eigen::Index n = v.rows();
  const double err =
      (v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (err > tol) {
    throw InputError(std::string(name) + " is not orthonormal: max |V^T V - "
                     "I| = " + std::to_string(err));
  }
}

void require_reciprocal_pair(const Eigen::Ref<const Vector>& g0,
                             const Eigen::Ref<const Vector>& h0) {
  if (g0.size() != h0.size()) {
    throw InputError("frequency responses have different lengths");
  }
  const double err =
      (g0.cwiseProduct(h0) - Vector::Ones(g0.size())).cwiseAbs().maxCoeff();
  if (err > 1e-8) {
    throw InputError("filter pair is not reciprocal: max |g0.*h0 - 1| = " +
                     std::to_string(err));
  }
}

double alpha_of(const Eigen::Ref<const Vector>& g0) {
  return project_ones_complement(g0).norm();
}

// sqrt(a0^2 - (1-sigma)^2 alpha^2) - sigma alpha, the sigma-dependent part
// of Q; requires alpha <= a0 so the radicand is nonnegative on [0,1].
double q_shape(double a0, double alpha, double sigma) {
  const double rad = a0 * a0 - (1.0 - sigma) * (1.0 - sigma) * alpha * alpha;
  return std::sqrt(std::max(0.0, rad)) - sigma * alpha;
}

}  // namespace

BoundParams BoundParams::defaults_for_theta(double theta) {
  BoundParams p;
  p.theta = theta;
  p.sigma1 = 0.5 * std::sqrt(kPi) * std::pow(theta, 1.5);
  p.sigma2 = 0.5 * std::sqrt(kPi) * theta;
  return p;
}

void BoundParams::validate() const {
  std::string violations;
  const auto add = [&violations](const std::string& msg) {
    if (!violations.empty()) {
      violations += "; ";
    }
    violations += msg;
  };
  if (!(theta > 0.0 && theta <= 0.324)) {
    add("theta must lie in (0, 0.324], got " + std::to_string(theta));
  } else {
    const double s1_max = 0.5 * std::sqrt(kPi) * std::pow(theta, 1.5);
    const double s2_max = 0.5 * std::sqrt(kPi) * theta;
    if (!(sigma1 > 0.0 && sigma1 <= s1_max + 1e-15)) {
      add("sigma1 must lie in (0, sqrt(pi) theta^1.5 / 2 = " +
          std::to_string(s1_max) + "], got " + std::to_string(sigma1));
    }
    if (!(sigma2 > 0.0 && sigma2 <= s2_max + 1e-15)) {
      add("sigma2 must lie in (0, sqrt(pi) theta / 2 = " +
          std::to_string(s2_max) + "], got " + std::to_string(sigma2));
    }
  }
  if (!(sigma3 > 0.0)) {
    add("sigma3 must be > 0, got " + std::to_string(sigma3));
  }
  if (!(sigma4 > 0.0 && sigma4 < 1.0)) {
    add("sigma4 must lie in (0, 1), got " + std::to_string(sigma4));
  }
  if (!(delta_prob > 0.0 && delta_prob < 1.0)) {
    add("delta_prob must lie in (0, 1), got " + std::to_string(delta_prob));
  }
  if (!(c1 > 0.0)) {
    add("c1 must be > 0, got " + std::to_string(c1));
  }
  if (sigma_q && !(*sigma_q >= 0.0 && *sigma_q <= 1.0)) {
    add("sigma_q must lie in [0, 1], got " + std::to_string(*sigma_q));
  }
  if (!violations.empty()) {
    throw InputError("invalid bound parameters: " + violations);
  }
}

A0Result recovery_threshold_a0(const Eigen::Ref<const Matrix>& v,
                               const BoundParams& params) {
  params.validate();
  require_orthonormal(v, "v", 1e-8);
  const double smax = spectral_norm(u_tilde(v));
  const double basis_factor = std::sqrt(std::max(0.0, 1.0 - smax * smax));
  const double bracket =
      (1.0 - params.sigma1) - 2.0 * params.theta * (1.0 + params.sigma2);
  A0Result result;
  result.bracket_nonpositive = bracket <= 0.0;
  const double raw = basis_factor * bracket * (1.0 - params.sigma4) /
                     ((1.0 + params.sigma3) * std::sqrt(params.theta));
  result.value = std::max(0.0, raw);
  return result;
}

RecoveryCheck exact_recovery_check(const Eigen::Ref<const Vector>& g0,
                                   const Eigen::Ref<const Matrix>& v,
                                   const BoundParams& params) {
  require_finite(g0, "g0");
  if (g0.size() != v.rows()) {
    throw InputError("g0 length must match the basis dimension");
  }
  RecoveryCheck check;
  check.lhs = alpha_of(g0);
  check.rhs = recovery_threshold_a0(v, params).value;
  check.holds = check.lhs <= check.rhs;
  return check;
}

Matrix error_matrix_e(const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& v_p,
                      const Eigen::Ref<const Vector>& g0,
                      const Eigen::Ref<const Vector>& h0,
                      const Eigen::Ref<const Matrix>& x0) {
  require_finite(x0, "x0");
  require_orthonormal(v, "v", 1e-8);
  require_orthonormal(v_p, "v_p", 1e-8);
  require_reciprocal_pair(g0, h0);
  if (v.rows() != v_p.rows() || v.rows() != g0.size() ||
      v.rows() != x0.rows()) {
    throw InputError("inconsistent dimensions for the error matrix");
  }
  const Matrix delta = v - v_p;
  const Matrix h_op = v * h0.asDiagonal() * v.transpose();
  return v_p *
         ((delta.transpose() - g0.asDiagonal() * (delta.transpose() * h_op)) *
          x0);
}

Matrix restrict_complement(const Eigen::Ref<const Matrix>& e,
                           const Eigen::Ref<const Matrix>& omega) {
  if (e.rows() != omega.rows() || e.cols() != omega.cols()) {
    throw InputError("support mask shape must match the error matrix");
  }
  if (((omega.array() != 0.0) && (omega.array() != 1.0)).any()) {
    throw InputError("support mask entries must be 0 or 1");
  }
  return e.cwiseProduct(Matrix::Ones(e.rows(), e.cols()) - omega);
}

std::optional<double> q_factor(const Eigen::Ref<const Vector>& g0, double a0,
                               const BoundParams& params) {
  params.validate();
  require_finite(g0, "g0");
  if (!(a0 >= 0.0)) {
    throw InputError("a0 must be >= 0");
  }
  const double alpha = alpha_of(g0);
  if (alpha > a0) {
    return std::nullopt;  // recovery condition fails, Q undefined
  }
  const double scale = params.c1 * std::sqrt(params.theta);
  if (params.sigma_q) {
    return scale * q_shape(a0, alpha, *params.sigma_q);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1000; ++k) {
    const double sigma = static_cast<double>(k) / 1000.0;
    worst = std::min(worst, q_shape(a0, alpha, sigma));
  }
  return scale * worst;
}

StabilityBound stability_bound(const Eigen::Ref<const Vector>& g0,
                               const Eigen::Ref<const Matrix>& e_comp,
                               const Eigen::Ref<const Matrix>& v, double a0,
                               double q, Eigen::Index p_samples) {
  require_finite(g0, "g0");
  require_finite(e_comp, "e_comp");
  require_orthonormal(v, "v", 1e-8);
  if (e_comp.rows() != v.rows() || g0.size() != v.rows()) {
    throw InputError("inconsistent dimensions for the stability bound");
  }
  if (p_samples < 1) {
    throw InputError("sample count must be >= 1");
  }
  const Eigen::Index n = g0.size();
  const Matrix moment =
      Matrix(g0.asDiagonal()) - g0 * g0.transpose() / static_cast<double>(n);
  const double e_l11 = norm_1_1(e_comp);
  StabilityBound result;
  result.numerator = 2.0 * spectral_norm(moment) * e_l11;
  const Matrix etv = e_comp.transpose() * v;
  const double kr_term = norm_1to2(khatri_rao_columns(etv, v));
  result.denominator =
      static_cast<double>(p_samples) * q - a0 * e_l11 - kr_term;
  if (result.denominator > 0.0) {
    result.bound = result.numerator / result.denominator;
  }
  return result;
}

TolerableDelta tolerable_delta_details(const Eigen::Ref<const Vector>& g0,
                                       const Eigen::Ref<const Vector>& h0,
                                       const Eigen::Ref<const Matrix>& x0,
                                       const Eigen::Ref<const Matrix>& v,
                                       const Eigen::Ref<const Matrix>& delta_dir,
                                       double a0, double q,
                                       Eigen::Index p_samples) {
  require_finite(x0, "x0");
  require_finite(delta_dir, "delta_dir");
  require_orthonormal(v, "v", 1e-8);
  require_reciprocal_pair(g0, h0);
  if (delta_dir.rows() != v.rows() || delta_dir.cols() != v.cols() ||
      x0.rows() != v.rows()) {
    throw InputError("inconsistent dimensions for the tolerable-delta bound");
  }
  if (std::abs(delta_dir.norm() - 1.0) > 1e-10) {
    throw InputError("delta direction must have unit Frobenius norm");
  }
  if (p_samples < 1) {
    throw InputError("sample count must be >= 1");
  }

  const Matrix h_op = v * h0.asDiagonal() * v.transpose();
  const Matrix factor =
      (delta_dir.transpose() -
       g0.asDiagonal() * (delta_dir.transpose() * h_op)) *
      x0;
  const double m2 = factor.norm();

  // The induced error direction, restricted off the support of x0 and
  // normalized. V - delta_dir is in general not orthonormal; the formula is
  // applied verbatim.
  const Matrix e = (v - delta_dir) * factor;
  const Matrix omega =
      (x0.array() != 0.0).cast<double>().matrix();
  const Matrix e_comp = restrict_complement(e, omega);
  const double e_comp_norm = e_comp.norm();
  TolerableDelta result;
  result.m2 = m2;
  result.bound = std::numeric_limits<double>::infinity();
  if (m2 == 0.0 || e_comp_norm == 0.0) {
    return result;
  }
  const Matrix e_bar = e_comp / e_comp_norm;
  result.m1 = a0 * norm_1_1(e_bar) +
              norm_1to2(khatri_rao_columns(
                  Matrix(e_bar.transpose() * v), v));
  if (result.m1 > 0.0) {
    result.bound =
        static_cast<double>(p_samples) * q / (result.m1 * result.m2);
  }
  return result;
}

double tolerable_delta_bound(const Eigen::Ref<const Vector>& g0,
                             const Eigen::Ref<const Vector>& h0,
                             const Eigen::Ref<const Matrix>& x0,
                             const Eigen::Ref<const Matrix>& v,
                             const Eigen::Ref<const Matrix>& delta_dir,
                             double a0, double q, Eigen::Index p_samples) {
  return tolerable_delta_details(g0, h0, x0, v, delta_dir, a0, q, p_samples)
      .bound;
}

double general_identity_residual(const Eigen::Ref<const Vector>& g,
                                 const Eigen::Ref<const Matrix>& v,
                                 const Eigen::Ref<const Matrix>& v_p,
                                 const Eigen::Ref<const Vector>& g0,
                                 const Eigen::Ref<const Vector>& h0,
                                 const Eigen::Ref<const Matrix>& x0) {
  require_finite(g, "g");
  if (g.size() != g0.size()) {
    throw InputError("g length must match g0");
  }
  const Matrix e = error_matrix_e(v, v_p, g0, h0, x0);
  const Matrix y = v * (h0.asDiagonal() * (v.transpose() * x0));
  const Matrix lhs = v_p * (g.asDiagonal() * (v_p.transpose() * y));
  const Vector w = g.cwiseProduct(h0);
  const Matrix rhs = v * (w.asDiagonal() * (v.transpose() * (x0 + e)));
  const double scale = x0.norm();
  if (scale == 0.0) {
    throw InputError("x0 must be nonzero");
  }
  return (lhs - rhs).norm() / scale;
}

double min_sample_size(const BoundParams& params, double c_prime) {
  params.validate();
  if (!(c_prime > 0.0)) {
    throw InputError("c_prime must be > 0");
  }
  const double sigma_m = std::min(std::min(params.sigma1, params.sigma2),
                                  std::min(params.sigma3, params.sigma4));
  return c_prime * std::log(4.0 / params.delta_prob) / (sigma_m * sigma_m);
}

}  // namespace gbd
