#pragma once

#include "gbd/linalg.hpp"

namespace gbd {

/// Relative l2 error of a recovered frequency response.
double re_g(const Eigen::Ref<const Vector>& g_hat,
            const Eigen::Ref<const Vector>& g0);

/// Support recovery accuracy: fraction of the true above-threshold support
/// that the estimate also places above threshold.
double acc_x(const Eigen::Ref<const Matrix>& x_hat,
             const Eigen::Ref<const Matrix>& x0, double tau = 0.1);

/// Relative Frobenius error of an operator or signal estimate.
double re_operator(const Eigen::Ref<const Matrix>& estimated,
                   const Eigen::Ref<const Matrix>& truth);

/// Node-domain inverse-filter operator V diag(g) V^T built from an estimated
/// basis and frequency response; invariant to signed permutations of the
/// basis columns (with g permuted to match).
Matrix g_operator(const Eigen::Ref<const Matrix>& v_hat,
                  const Eigen::Ref<const Vector>& g_hat);

/// Node-domain forward-filter operator V diag(1/g) V^T, with g entries
/// clipped away from zero at min_abs to keep the inverse finite.
Matrix h_operator(const Eigen::Ref<const Matrix>& v_hat,
                  const Eigen::Ref<const Vector>& g_hat,
                  double min_abs = 1e-8);

}  // namespace gbd
