#pragma once

#include <Eigen/Dense>

namespace testsupport {

struct LpResult {
  bool optimal = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// Two-phase dense tableau simplex with Bland's anti-cycling rule for
///   min c^T x  s.t.  A x = b,  x >= 0.
/// Small and slow on purpose: it is an independent oracle, sharing no code
/// with the solver under test.
LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c);

struct L11Program {
  double objective = 0.0;
  Eigen::VectorXd g;
};

/// Exact minimizer of || V diag(g) V^T Y ||_{1,1} over {1^T g = N}, posed as
/// a linear program (split variables plus entrywise slabs).
L11Program solve_l11_program(const Eigen::MatrixXd& v,
                             const Eigen::MatrixXd& y);

}  // namespace testsupport
