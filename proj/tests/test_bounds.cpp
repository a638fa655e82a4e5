#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "gbd/bounds.hpp"
#include "gbd/filters.hpp"
#include "gbd/graph.hpp"
#include "gbd/perturbation.hpp"
#include "gbd/rng.hpp"

using gbd::Matrix;
using gbd::Vector;

namespace {

struct BoundInstance {
  Matrix v;
  Matrix v_p;
  Vector g0;
  Vector h0;
  Matrix x0;
  Matrix omega;
  Matrix y;
};

BoundInstance make_instance(int n, int p, double alpha, double target_delta,
                            std::uint64_t seed) {
  const auto eg =
      gbd::sample_experiment_graph(n, 0.6, gbd::derive_seed(seed, {0}));
  const auto pair =
      gbd::controlled_inverse_response(n, alpha, gbd::derive_seed(seed, {1}));
  const auto src =
      gbd::sample_bernoulli_gaussian(n, p, 0.2, gbd::derive_seed(seed, {2}));
  BoundInstance inst;
  inst.v = eg.basis.vectors;
  inst.g0 = pair.g0;
  inst.h0 = pair.h0;
  inst.x0 = src.x;
  inst.omega = src.omega;
  const auto f = gbd::filter_from_freq(eg.basis, pair.h0);
  inst.y = gbd::synthesize_observations(f, src);
  if (target_delta == 0.0) {
    inst.v_p = inst.v;
  } else {
    const Matrix w = gbd::random_unit_skew(n, gbd::derive_seed(seed, {3}));
    inst.v_p = gbd::cayley_perturb(
        inst.v, w, gbd::xi_for_target_delta(w, target_delta, 1e-10));
  }
  return inst;
}

}  // namespace

TEST_CASE("parameter defaults sit at the admissible limits") {
  const auto p = gbd::BoundParams::defaults_for_theta(0.15);
  CHECK(p.sigma1 ==
        doctest::Approx(0.5 * std::sqrt(M_PI) * std::pow(0.15, 1.5)));
  CHECK(p.sigma2 == doctest::Approx(0.5 * std::sqrt(M_PI) * 0.15));
  CHECK(p.sigma3 == 0.1);
  CHECK(p.sigma4 == 0.1);
  CHECK(p.c1 == 1.0);
  CHECK(!p.sigma_q.has_value());
  p.validate();  // must not throw

  auto bad = p;
  bad.theta = 0.5;  // outside (0, 0.324]
  CHECK_THROWS_AS(bad.validate(), gbd::InputError);

  bad = p;
  bad.sigma1 = 1.0;  // above the theta-dependent cap
  CHECK_THROWS_AS(bad.validate(), gbd::InputError);

  bad = p;
  bad.sigma4 = 1.0;
  CHECK_THROWS_AS(bad.validate(), gbd::InputError);

  bad = p;
  bad.sigma_q = 1.5;
  CHECK_THROWS_AS(bad.validate(), gbd::InputError);
}

TEST_CASE("recovery threshold shrinks as the source densifies") {
  const auto inst = make_instance(16, 20, 0.1, 0.0, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}) {
    const auto r = gbd::recovery_threshold_a0(
        inst.v, gbd::BoundParams::defaults_for_theta(theta));
    CHECK(r.value >= 0.0);
    CHECK(r.value < prev);
    CHECK(!r.bracket_nonpositive);  // guaranteed on (0, 0.324]
    prev = r.value;
  }
}

TEST_CASE("identity basis admits no recovery margin") {
  // V = I concentrates every eigenvector on one node; U~ then equals the
  // centering projector with spectral norm 1, killing the threshold.
  const auto params = gbd::BoundParams::defaults_for_theta(0.15);
  const auto r = gbd::recovery_threshold_a0(Matrix::Identity(10, 10), params);
  CHECK(r.value == 0.0);
}

TEST_CASE("recovery check compares the off-mean mass to the threshold") {
  const auto inst = make_instance(14, 20, 0.25, 0.0, 7);
  const auto params = gbd::BoundParams::defaults_for_theta(0.15);
  const auto check = gbd::exact_recovery_check(inst.g0, inst.v, params);
  CHECK(check.lhs == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(check.rhs ==
        doctest::Approx(gbd::recovery_threshold_a0(inst.v, params).value));
  CHECK(check.holds == (check.lhs <= check.rhs));

  // The constant response always satisfies the condition.
  const auto trivial =
      gbd::exact_recovery_check(Vector::Ones(14), inst.v, params);
  CHECK(trivial.lhs == 0.0);
  CHECK(trivial.holds);

  // A response this far from constant can never satisfy it.
  const auto wild = gbd::controlled_inverse_response(14, 10.0, 3);
  CHECK(!gbd::exact_recovery_check(wild.g0, inst.v, params).holds);
}

TEST_CASE("basis error acts as an exact additive data perturbation") {
  for (double target : {0.25, 1.0, 2.5}) {
    const auto inst = make_instance(12, 15, 0.15, target, 11);
    const Matrix e =
        gbd::error_matrix_e(inst.v, inst.v_p, inst.g0, inst.h0, inst.x0);
    const Matrix deconv =
        inst.v_p *
        (inst.g0.asDiagonal() * (inst.v_p.transpose() * inst.y));
    CHECK((deconv - (inst.x0 + e)).norm() <= 1e-10 * inst.x0.norm());
  }
}

TEST_CASE("identity residual vanishes at g0 and is measured elsewhere") {
  const auto inst = make_instance(12, 15, 0.15, 1.0, 13);
  const double at_g0 = gbd::general_identity_residual(
      inst.g0, inst.v, inst.v_p, inst.g0, inst.h0, inst.x0);
  CHECK(at_g0 <= 1e-10);

  Vector g_other = inst.g0;
  g_other(0) += 0.5;
  g_other(1) -= 0.5;
  const double elsewhere = gbd::general_identity_residual(
      g_other, inst.v, inst.v_p, inst.g0, inst.h0, inst.x0);
  CHECK(elsewhere >= 0.0);
  CHECK(std::isfinite(elsewhere));
}

TEST_CASE("error norm scales as m2 times the perturbation size") {
  const auto inst = make_instance(12, 15, 0.15, 0.8, 17);
  const Matrix delta = inst.v - inst.v_p;
  const Matrix dir = delta / delta.norm();

  const auto params = gbd::BoundParams::defaults_for_theta(0.2);
  const auto a0 = gbd::recovery_threshold_a0(inst.v, params);
  const auto q = gbd::q_factor(inst.g0, a0.value, params);
  REQUIRE(q.has_value());

  const auto details = gbd::tolerable_delta_details(
      inst.g0, inst.h0, inst.x0, inst.v, dir, a0.value, *q, 15);
  const Matrix e =
      gbd::error_matrix_e(inst.v, inst.v_p, inst.g0, inst.h0, inst.x0);
  // E = V_p (||Delta|| * factor_dir) with V_p orthonormal.
  CHECK(e.norm() ==
        doctest::Approx(details.m2 * delta.norm()).epsilon(1e-10));
  CHECK(details.m1 > 0.0);
  CHECK(details.bound ==
        doctest::Approx(15.0 * *q / (details.m1 * details.m2)));
  CHECK(details.bound ==
        gbd::tolerable_delta_bound(inst.g0, inst.h0, inst.x0, inst.v, dir,
                                   a0.value, *q, 15));
}

TEST_CASE("support restriction keeps only off-support entries") {
  Matrix e(2, 2);
  e << 1.0, 2.0, 3.0, 4.0;
  Matrix omega(2, 2);
  omega << 1.0, 0.0, 0.0, 1.0;
  const Matrix r = gbd::restrict_complement(e, omega);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 2.0);
  CHECK(r(1, 0) == 3.0);
  CHECK(r(1, 1) == 0.0);

  Matrix bad_mask = omega;
  bad_mask(0, 0) = 0.5;
  CHECK_THROWS_AS(gbd::restrict_complement(e, bad_mask), gbd::InputError);
}

TEST_CASE("q factor endpoints, worst case and scaling") {
  const auto inst = make_instance(14, 10, 0.2, 0.0, 19);
  auto params = gbd::BoundParams::defaults_for_theta(0.15);
  const double a0 = gbd::recovery_threshold_a0(inst.v, params).value;
  REQUIRE(a0 > 0.2);  // alpha = 0.2 must be inside the admissible region
  const double alpha = 0.2;
  const double scale = params.c1 * std::sqrt(params.theta);

  params.sigma_q = 0.0;
  const auto q0 = gbd::q_factor(inst.g0, a0, params);
  REQUIRE(q0.has_value());
  CHECK(*q0 ==
        doctest::Approx(scale * std::sqrt(a0 * a0 - alpha * alpha)));

  params.sigma_q = 1.0;
  const auto q1 = gbd::q_factor(inst.g0, a0, params);
  REQUIRE(q1.has_value());
  CHECK(*q1 == doctest::Approx(scale * (a0 - alpha)));

  params.sigma_q.reset();
  const auto qw = gbd::q_factor(inst.g0, a0, params);
  REQUIRE(qw.has_value());
  CHECK(*qw <= *q0 + 1e-12);
  CHECK(*qw <= *q1 + 1e-12);
  CHECK(*qw >= 0.0);  // nonnegative whenever alpha <= a0

  params.c1 = 3.0;
  const auto q3 = gbd::q_factor(inst.g0, a0, params);
  CHECK(*q3 == doctest::Approx(3.0 * *qw));

  // Past the threshold the factor is undefined.
  params.c1 = 1.0;
  const auto beyond = gbd::controlled_inverse_response(14, a0 + 0.5, 5);
  CHECK(!gbd::q_factor(beyond.g0, a0, params).has_value());
}

TEST_CASE("q is nonnegative across the whole admissible range") {
  const auto params = gbd::BoundParams::defaults_for_theta(0.2);
  const double a0 = 0.7;
  for (int i = 0; i <= 20; ++i) {
    const double alpha = a0 * i / 20.0;
    const auto pair = gbd::controlled_inverse_response(16, alpha, 23);
    const auto q = gbd::q_factor(pair.g0, a0, params);
    REQUIRE(q.has_value());
    CHECK(*q >= -1e-15);
  }
}

TEST_CASE("stability bound wiring and feasibility breakdown") {
  const auto inst = make_instance(12, 15, 0.1, 0.2, 29);
  const auto params = gbd::BoundParams::defaults_for_theta(0.2);
  const double a0 = gbd::recovery_threshold_a0(inst.v, params).value;
  const auto q = gbd::q_factor(inst.g0, a0, params);
  REQUIRE(q.has_value());
  REQUIRE(*q > 0.0);

  const Matrix e =
      gbd::error_matrix_e(inst.v, inst.v_p, inst.g0, inst.h0, inst.x0);
  const Matrix e_comp = gbd::restrict_complement(e, inst.omega);

  const auto sb = gbd::stability_bound(inst.g0, e_comp, inst.v, a0, *q, 15);
  // Independent recomputation of the numerator via full SVD.
  const Matrix moment = Matrix(inst.g0.asDiagonal()) -
                        inst.g0 * inst.g0.transpose() / 12.0;
  const double smax = Eigen::JacobiSVD<Matrix>(moment).singularValues()(0);
  CHECK(sb.numerator ==
        doctest::Approx(2.0 * smax * e_comp.cwiseAbs().sum()).epsilon(1e-9));

  if (sb.bound) {
    CHECK(*sb.bound == doctest::Approx(sb.numerator / sb.denominator));
    CHECK(sb.denominator > 0.0);
  }

  // Zero perturbation: the bound collapses to zero.
  const auto clean =
      gbd::stability_bound(inst.g0, Matrix::Zero(12, 15), inst.v, a0, *q, 15);
  REQUIRE(clean.bound.has_value());
  CHECK(*clean.bound == 0.0);
  CHECK(clean.denominator == doctest::Approx(15.0 * *q));

  // Blowing the error up must eventually kill the denominator.
  const auto blown = gbd::stability_bound(inst.g0, Matrix(1e6 * e_comp),
                                          inst.v, a0, *q, 15);
  CHECK(!blown.bound.has_value());
  CHECK(blown.denominator < 0.0);

  // Denominator is monotone in the error scale.
  double prev_den = clean.denominator;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const auto s =
        gbd::stability_bound(inst.g0, Matrix(t * e_comp), inst.v, a0, *q, 15);
    CHECK(s.denominator < prev_den);
    prev_den = s.denominator;
  }
}

TEST_CASE("fully dense sources make the off-support bound vacuous") {
  const auto inst = make_instance(10, 8, 0.1, 0.5, 31);
  Matrix dense_x = Matrix::Ones(10, 8);
  const Matrix delta = inst.v - inst.v_p;
  const Matrix dir = delta / delta.norm();
  const auto details = gbd::tolerable_delta_details(
      inst.g0, inst.h0, dense_x, inst.v, dir, 0.5, 0.1, 8);
  CHECK(std::isinf(details.bound));

  Matrix not_unit = 2.0 * dir;
  CHECK_THROWS_AS(
      gbd::tolerable_delta_details(inst.g0, inst.h0, inst.x0, inst.v,
                                   not_unit, 0.5, 0.1, 8),
      gbd::InputError);
}

TEST_CASE("sample-size report follows the slack parameters") {
  auto params = gbd::BoundParams::defaults_for_theta(0.15);
  const double sigma_m =
      std::min(std::min(params.sigma1, params.sigma2),
               std::min(params.sigma3, params.sigma4));
  const double expect = std::log(4.0 / 0.05) / (sigma_m * sigma_m);
  CHECK(gbd::min_sample_size(params, 1.0) == doctest::Approx(expect));
  CHECK(gbd::min_sample_size(params, 2.0) == doctest::Approx(2.0 * expect));
  CHECK_THROWS_AS(gbd::min_sample_size(params, 0.0), gbd::InputError);
}
