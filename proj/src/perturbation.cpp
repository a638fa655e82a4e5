#include "gbd/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gbd/rng.hpp"

namespace gbd {

namespace {

void require_skew(const Eigen::Ref<const Matrix>& w) {
  if (w.rows() != w.cols()) {
    throw InputError("skew matrix must be square");
  }
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  const double asym = (w + w.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw InputError("matrix is not skew-symmetric: max |W + W^T| = " +
                     std::to_string(asym));
  }
}

}  // namespace

Matrix random_unit_skew(Eigen::Index n, std::uint64_t seed) {
  if (n < 2) {
    throw InputError("skew matrix needs n >= 2 to be nonzero");
  }
  Rng rng(seed);
  Matrix b = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      b(i, j) = rng.normal();
    }
  }
  Matrix w = 0.5 * (b - b.transpose());
  const double norm = w.norm();
  if (norm == 0.0) {
    throw NumericalError("degenerate zero skew draw");
  }
  w /= norm;
  return w;
}

Matrix cayley_perturb(const Eigen::Ref<const Matrix>& v,
                      const Eigen::Ref<const Matrix>& w, double xi) {
  require_finite(v, "v");
  require_finite(w, "w");
  require_skew(w);
  if (v.rows() != w.rows()) {
    throw InputError("basis and skew matrix dimensions disagree");
  }
  if (!(xi >= 0.0)) {
    throw InputError("cayley parameter xi must be >= 0");
  }
  const Eigen::Index n = v.rows();
  if ((v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() >
      1e-8) {
    throw InputError("cayley_perturb expects an orthonormal basis");
  }
  if (xi == 0.0) {
    return v;
  }
  const Matrix lhs = Matrix::Identity(n, n) + xi * w;
  const Matrix rhs = (Matrix::Identity(n, n) - xi * w) * v;
  return solve_linear(lhs, rhs);
}

double predicted_delta_norm(const Eigen::Ref<const Matrix>& w, double xi) {
  require_finite(w, "w");
  require_skew(w);
  if (!(xi >= 0.0)) {
    throw InputError("cayley parameter xi must be >= 0");
  }
  if (xi == 0.0) {
    return 0.0;
  }
  // Eigenvalues of W are pure imaginary +/- i mu_k; W^T W is symmetric PSD
  // with eigenvalues mu_k^2.
  const EighResult gram = eigh_symmetric(w.transpose() * w);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < gram.eigenvalues.size(); ++k) {
    const double mu2 = std::max(0.0, gram.eigenvalues(k));
    const double t = mu2 * xi * xi;
    sum += 4.0 * t / (1.0 + t);
  }
  return std::sqrt(sum);
}

double xi_for_target_delta(const Eigen::Ref<const Matrix>& w,
                           double target_delta, double tol) {
  require_skew(w);
  if (!(target_delta >= 0.0)) {
    throw InputError("target perturbation norm must be >= 0");
  }
  if (!(tol > 0.0)) {
    throw InputError("bisection tolerance must be > 0");
  }
  if (target_delta == 0.0) {
    return 0.0;
  }
  double lo = 0.0;
  double hi = 1e6;
  const double at_hi = predicted_delta_norm(w, hi);
  if (target_delta > at_hi) {
    throw InputError("target perturbation norm " +
                     std::to_string(target_delta) +
                     " exceeds the achievable supremum " +
                     std::to_string(at_hi) + " for this skew direction");
  }
  double mid = hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double val = predicted_delta_norm(w, mid);
    if (std::abs(val - target_delta) <= tol) {
      return mid;
    }
    if (val < target_delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

EigenBasis covariance_eigenbasis(const Eigen::Ref<const Matrix>& y) {
  require_finite(y, "y");
  if (y.cols() < 2) {
    throw InputError("covariance estimate needs at least two observations");
  }
  const Matrix cov = y * y.transpose() / static_cast<double>(y.cols() - 1);
  const EighResult decomp = eigh_symmetric(cov);
  const Eigen::Index n = y.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return decomp.eigenvalues(a) > decomp.eigenvalues(b);
                   });
  EigenBasis basis;
  basis.eigenvalues.resize(n);
  basis.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    basis.eigenvalues(k) = decomp.eigenvalues(order[static_cast<std::size_t>(k)]);
    basis.vectors.col(k) = decomp.vectors.col(order[static_cast<std::size_t>(k)]);
  }
  return basis;
}

}  // namespace gbd
