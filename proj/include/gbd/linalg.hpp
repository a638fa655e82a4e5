#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gbd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when an argument violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot deliver its contract
/// (singular pivot, eigensolver non-convergence, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejects any matrix containing NaN or Inf entries.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* name) {
  if (!m.allFinite()) {
    throw InputError(std::string(name) + ": non-finite entries");
  }
}

struct EighResult {
  Vector eigenvalues;  // ascending
  Matrix vectors;      // orthonormal columns, sign-normalized
};

/// Symmetric eigendecomposition S = V diag(lambda) V^T.
///
/// Eigenvalues come back ascending. Each eigenvector is sign-fixed so that
/// its largest-magnitude entry (first such index on ties) is positive,
/// which makes the output deterministic.
EighResult eigh_symmetric(const Eigen::Ref<const Matrix>& s,
                          double symmetry_tol = 1e-10);

/// Solves A X = B for square nonsingular A (partial-pivot LU).
/// A pivot with magnitude <= 1e-12 * ||A||_F is reported as singular.
Matrix solve_linear(const Eigen::Ref<const Matrix>& a,
                    const Eigen::Ref<const Matrix>& b);

/// Column-wise Kronecker product: column k of the result is a_k (x) b_k.
Matrix khatri_rao_columns(const Eigen::Ref<const Matrix>& a,
                          const Eigen::Ref<const Matrix>& b);

/// Entrywise absolute sum, sum_ij |A_ij|.
template <typename Derived>
double norm_1_1(const Eigen::MatrixBase<Derived>& a) {
  return a.cwiseAbs().sum();
}

/// Maximum column l2 norm.
template <typename Derived>
double norm_1to2(const Eigen::MatrixBase<Derived>& a) {
  if (a.cols() == 0) return 0.0;
  return a.colwise().norm().maxCoeff();
}

/// Largest singular value, computed by power iteration on A^T A.
double spectral_norm(const Eigen::Ref<const Matrix>& a, double tol = 1e-10);

/// Projection onto span^perp(1_N): x - (1^T x / N) 1.
Vector project_ones_complement(const Eigen::Ref<const Vector>& x);

/// In-place modified Gram-Schmidt orthonormalization of the columns of m.
/// Two passes, so the result is orthonormal to machine precision.
void modified_gram_schmidt(Matrix& m);

}  // namespace gbd
