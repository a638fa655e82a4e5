#include "gbd/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace gbd {

namespace {

// Flip eigenvector signs so the largest-magnitude entry of each column is
// positive; on exact magnitude ties the first such index decides.
void normalize_column_signs(Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    if (v(imax, j) < 0.0) v.col(j) = -v.col(j);
  }
}

}  // namespace

EighResult eigh_symmetric(const Eigen::Ref<const Matrix>& s,
                          double symmetry_tol) {
  if (s.rows() != s.cols()) {
    throw InputError("eigh_symmetric: matrix is not square");
  }
  require_finite(s, "eigh_symmetric");
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > symmetry_tol) {
    throw InputError("eigh_symmetric: asymmetry " + std::to_string(asym) +
                     " exceeds tolerance " + std::to_string(symmetry_tol));
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigh_symmetric: eigensolver did not converge");
  }
  EighResult result{solver.eigenvalues(), solver.eigenvectors()};
  normalize_column_signs(result.vectors);
  return result;
}

Matrix solve_linear(const Eigen::Ref<const Matrix>& a,
                    const Eigen::Ref<const Matrix>& b) {
  if (a.rows() != a.cols()) {
    throw InputError("solve_linear: A is not square");
  }
  if (a.rows() != b.rows()) {
    throw InputError("solve_linear: row counts of A and B differ");
  }
  require_finite(a, "solve_linear A");
  require_finite(b, "solve_linear B");

  Eigen::PartialPivLU<Matrix> lu(a);
  const double pivot_floor = 1e-12 * a.norm();
  const auto pivots = lu.matrixLU().diagonal();
  for (Eigen::Index i = 0; i < pivots.size(); ++i) {
    if (std::abs(pivots(i)) <= pivot_floor) {
      throw NumericalError("solve_linear: singular pivot " + std::to_string(i) +
                           " (|u| = " + std::to_string(std::abs(pivots(i))) +
                           ")");
    }
  }
  return lu.solve(b);
}

Matrix khatri_rao_columns(const Eigen::Ref<const Matrix>& a,
                          const Eigen::Ref<const Matrix>& b) {
  if (a.cols() != b.cols()) {
    throw InputError("khatri_rao_columns: column counts differ");
  }
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), k, b.rows(), 1) = a(i, k) * b.col(k);
    }
  }
  return out;
}

double spectral_norm(const Eigen::Ref<const Matrix>& a, double tol) {
  require_finite(a, "spectral_norm");
  if (a.size() == 0) return 0.0;

  const Matrix gram = a.transpose() * a;  // n x n, PSD
  const Eigen::Index n = gram.rows();

  // Deterministic start vector; reseeded restarts cover the (measure-zero)
  // case of starting in the null space.
  std::mt19937_64 gen(0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int restart = 0; restart < 4; ++restart) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(gen);
    double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;

    double lambda = v.dot(gram * v);
    constexpr int kMaxIters = 100000;
    for (int it = 0; it < kMaxIters; ++it) {
      Vector w = gram * v;
      const double wnorm = w.norm();
      if (wnorm == 0.0) break;  // v in the null space; restart
      v = w / wnorm;
      const double next = v.dot(gram * v);
      if (std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-300)) {
        return std::sqrt(std::max(next, 0.0));
      }
      lambda = next;
    }
    if (lambda > 0.0) return std::sqrt(lambda);
  }
  return 0.0;  // a is (numerically) zero
}

Vector project_ones_complement(const Eigen::Ref<const Vector>& x) {
  if (x.size() == 0) return x;
  return x.array() - x.mean();
}

void modified_gram_schmidt(Matrix& m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index k = 0; k < j; ++k) {
        m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
      }
      const double nj = m.col(j).norm();
      if (nj <= 1e-300) {
        throw NumericalError("modified_gram_schmidt: rank-deficient column " +
                             std::to_string(j));
      }
      m.col(j) /= nj;
    }
  }
}

}  // namespace gbd
