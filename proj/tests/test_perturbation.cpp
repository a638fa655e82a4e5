#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gbd/graph.hpp"
#include "gbd/perturbation.hpp"
#include "gbd/rng.hpp"

using gbd::Matrix;
using gbd::Vector;

TEST_CASE("random skew direction is skew and unit Frobenius") {
  const Matrix w = gbd::random_unit_skew(14, 5);
  CHECK((w + w.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(gbd::random_unit_skew(1, 5), gbd::InputError);
}

TEST_CASE("cayley transform preserves orthonormality for any magnitude") {
  gbd::Rng rng(2);
  const Matrix v = gbd::random_orthonormal(12, rng);
  const Matrix w = gbd::random_unit_skew(12, 3);
  for (double xi : {0.0, 0.1, 1.0, 50.0, 1e4}) {
    const Matrix vp = gbd::cayley_perturb(v, w, xi);
    const double err =
        (vp.transpose() * vp - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff();
    CHECK(err <= 1e-10);
  }
  // xi = 0 is exactly the identity transform.
  CHECK((gbd::cayley_perturb(v, w, 0.0) - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cayley transform rejects bad inputs") {
  gbd::Rng rng(4);
  const Matrix v = gbd::random_orthonormal(8, rng);
  const Matrix w = gbd::random_unit_skew(8, 6);

  Matrix not_skew = w;
  not_skew(0, 0) = 0.5;
  CHECK_THROWS_AS(gbd::cayley_perturb(v, not_skew, 1.0), gbd::InputError);

  Matrix not_ortho = v;
  not_ortho(0, 0) += 1e-3;
  CHECK_THROWS_AS(gbd::cayley_perturb(not_ortho, w, 1.0), gbd::InputError);

  CHECK_THROWS_AS(gbd::cayley_perturb(v, w, -1.0), gbd::InputError);
}

TEST_CASE("closed-form perturbation norm matches the realized one") {
  gbd::Rng rng(8);
  const Matrix v = gbd::random_orthonormal(15, rng);
  const Matrix w = gbd::random_unit_skew(15, 9);
  for (double xi : {0.05, 0.3, 1.0, 4.0, 25.0}) {
    const Matrix vp = gbd::cayley_perturb(v, w, xi);
    const double realized = (v - vp).norm();
    const double predicted = gbd::predicted_delta_norm(w, xi);
    CHECK(realized == doctest::Approx(predicted).epsilon(1e-8));
  }
}

TEST_CASE("perturbation norm saturates at twice the root rank") {
  const Matrix w = gbd::random_unit_skew(11, 13);
  // W^T W eigenvalues mu^2: as xi grows each term 4 mu^2 xi^2/(1+mu^2 xi^2)
  // tends to 4 for mu > 0, so the squared norm tends to 4 rank(W).
  const Eigen::FullPivLU<Matrix> lu(w);
  const double rank = static_cast<double>(lu.rank());
  const double limit_sq = 4.0 * rank;
  const double at_large = gbd::predicted_delta_norm(w, 1e9);
  CHECK(at_large * at_large == doctest::Approx(limit_sq).epsilon(1e-4));
}

TEST_CASE("bisection inverts the norm map") {
  const Matrix w = gbd::random_unit_skew(13, 21);
  for (double target : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const double xi = gbd::xi_for_target_delta(w, target, 1e-12);
    CHECK(gbd::predicted_delta_norm(w, xi) ==
          doctest::Approx(target).epsilon(1e-9));
  }
  CHECK(gbd::xi_for_target_delta(w, 0.0, 1e-12) == 0.0);

  // The reachable supremum is 2 sqrt(rank); far beyond it must throw.
  CHECK_THROWS_AS(gbd::xi_for_target_delta(w, 100.0, 1e-12), gbd::InputError);
}

TEST_CASE("covariance eigenbasis recovers the filter basis from many samples") {
  // Y = H X with X unit-variance white: C_y = H^2, whose eigenvectors are
  // the graph basis (up to sign and ordering by h~^2).
  const auto eg = gbd::sample_experiment_graph(10, 0.6, 31);
  Vector freq(10);
  for (int i = 0; i < 10; ++i) freq(i) = 1.0 + 0.4 * i;  // distinct |h~|
  const Matrix h = eg.basis.vectors * freq.asDiagonal() *
                   eg.basis.vectors.transpose();
  gbd::Rng rng(77);
  const Matrix x = gbd::random_gaussian_matrix(10, 200000, rng);
  const auto est = gbd::covariance_eigenbasis(h * x);

  // Descending covariance spectrum ~ h~^2 sorted descending.
  for (int i = 1; i < 10; ++i) {
    CHECK(est.eigenvalues(i - 1) >= est.eigenvalues(i));
  }
  // Column i of the estimate matches the graph eigenvector with the
  // (i+1)-th largest |h~| up to sign.
  for (int i = 0; i < 10; ++i) {
    const int truth_col = 9 - i;  // freq is increasing, so reverse order
    const double align =
        std::abs(est.vectors.col(i).dot(eg.basis.vectors.col(truth_col)));
    CHECK(align > 0.99);
  }
}

TEST_CASE("covariance eigenbasis of the identity is the identity") {
  const Matrix y = Matrix::Identity(6, 6);
  const auto est = gbd::covariance_eigenbasis(y);
  // All covariance eigenvalues tie at 1/(P-1); the stable ordering plus the
  // deterministic sign fix must hand back I exactly.
  CHECK((est.vectors - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(gbd::covariance_eigenbasis(Matrix::Ones(4, 1)),
                  gbd::InputError);
}
