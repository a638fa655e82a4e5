#include "gbd/bdog.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gbd {

namespace {

constexpr double kBbStepMin = 1e-8;
constexpr double kBbStepMax = 1e4;
constexpr double kStepFloor = 1e-18;
constexpr int kMaxAnnealStages = 40;
// Model jumps cost about n times a gradient step, so oracle-scale problems
// take them every iteration while sweep-scale ones space them out (a stall
// still triggers one at any size).
constexpr Eigen::Index kEveryIterJumpSize = 4000;

void require_solver_inputs(const Eigen::Ref<const Matrix>& y,
                           const Eigen::Ref<const Matrix>& v) {
  require_finite(y, "y");
  require_finite(v, "v");
  if (v.rows() != v.cols()) {
    throw InputError("eigenbasis must be square");
  }
  if (y.rows() != v.rows()) {
    throw InputError("observation rows must match the basis dimension");
  }
  if (y.cols() < 1) {
    throw InputError("need at least one observation column");
  }
  const Eigen::Index n = v.rows();
  const double ortho =
      (v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (ortho > 1e-6) {
    throw InputError("basis is not orthonormal: max |V^T V - I| = " +
                     std::to_string(ortho));
  }
}

// Orthogonal projection onto the affine set {1^T g = N}.
void reproject_feasible(Vector& g) {
  const double n = static_cast<double>(g.size());
  g.array() += (n - g.sum()) / n;
}

// The objective is Huber applied entrywise to the linear map g -> T g,
// where column k of T is vec(v_k (V^T Y)_{k,:}) in column-major order.
Matrix build_linear_map(const Eigen::Ref<const Matrix>& v, const Matrix& vty) {
  const Eigen::Index n = v.rows();
  const Eigen::Index p = vty.cols();
  Matrix t(n * p, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Matrix outer = v.col(k) * vty.row(k);
    t.col(k) = outer.reshaped();
  }
  return t;
}

// Feasible minimizer of the piecewise-quadratic model frozen at the current
// kink pattern: entries inside the knee contribute z^2/(2 eps), entries
// outside contribute sign(z) z. Solved through the bordered KKT system with
// a tiny ridge, so dead frequencies (zero rows of V^T Y) stay harmless.
std::optional<Vector> model_jump(const Matrix& t, const Vector& z,
                                 double epsilon, double n_target) {
  const Eigen::Index nq = t.rows();
  const Eigen::Index n = t.cols();
  Matrix t_in = t;
  Vector sign_out = Vector::Zero(nq);
  for (Eigen::Index q = 0; q < nq; ++q) {
    if (std::abs(z(q)) >= epsilon) {
      t_in.row(q).setZero();
      sign_out(q) = z(q) > 0.0 ? 1.0 : -1.0;
    }
  }
  Matrix quad = (t_in.transpose() * t_in) / epsilon;
  const Vector lin = t.transpose() * sign_out;
  const double ridge = 1e-12 * (1.0 + quad.trace() / static_cast<double>(n));
  quad.diagonal().array() += ridge;

  Matrix kkt = Matrix::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = quad;
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(n, 0, 1, n).setOnes();
  Vector rhs(n + 1);
  rhs.head(n) = -lin;
  rhs(n) = n_target;
  Vector sol;
  try {
    sol = solve_linear(kkt, rhs).col(0);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
  if (!sol.allFinite()) {
    return std::nullopt;
  }
  Vector g = sol.head(n);
  reproject_feasible(g);
  return g;
}

struct StageResult {
  Vector g;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// One projected-gradient descent run at a fixed knee: Barzilai-Borwein
// initial step, Armijo backtracking, and a periodic model jump that is
// accepted only when it beats the line-search candidate. A line-search
// stall that the jump cannot improve certifies numerical optimality for
// this convex objective, so it reports converged.
StageResult descend_stage(const Eigen::Ref<const Matrix>& v, const Matrix& vty,
                          const Matrix& t, Vector g, double epsilon,
                          const BdogConfig& config) {
  const double n_target = static_cast<double>(g.size());
  const auto eval_objective = [&](const Vector& gc) {
    const Matrix z = v * (gc.asDiagonal() * vty);
    return z.unaryExpr([&](double x) { return huber(x, epsilon); }).sum();
  };
  const auto eval_grad = [&](const Vector& gc) {
    const Matrix z = v * (gc.asDiagonal() * vty);
    const Matrix d =
        z.unaryExpr([&](double x) { return huber_deriv(x, epsilon); });
    return Vector(((v.transpose() * d).cwiseProduct(vty)).rowwise().sum());
  };

  StageResult out;
  double f = eval_objective(g);
  Vector grad = eval_grad(g);
  Vector dir = -project_ones_complement(grad);
  const int jump_period = t.size() <= kEveryIterJumpSize ? 1 : 10;

  Vector g_prev;
  Vector grad_prev;
  double step_prev = 1.0;
  bool have_prev = false;

  for (int it = 0; it < config.max_iters; ++it) {
    out.trace.push_back(f);
    const double dir_sq = dir.squaredNorm();
    const double dir_norm = std::sqrt(dir_sq);
    if (dir_norm <= config.grad_tol * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }

    double step = 1.0 / (1.0 + dir_norm);
    if (have_prev) {
      const Vector s = g - g_prev;
      const Vector dy = grad - grad_prev;
      const double sy = s.dot(dy);
      step = sy > 0.0 ? s.squaredNorm() / sy : step_prev;
    }
    step = std::clamp(step, kBbStepMin, kBbStepMax);

    Vector g_try;
    double f_try = f;
    bool accepted = false;
    while (step > kStepFloor) {
      g_try = g + step * dir;
      reproject_feasible(g_try);
      f_try = eval_objective(g_try);
      // The strict inequality matters: when the Armijo decrement rounds
      // below one ulp of f, accepting an equal objective lets the iterate
      // ping-pong at the numerical floor instead of stalling out.
      if (f_try < f && f_try <= f - config.armijo_c * step * dir_sq) {
        accepted = true;
        break;
      }
      step *= config.armijo_shrink;
    }

    if (!accepted || (it % jump_period) == jump_period - 1) {
      const Vector z = (v * (g.asDiagonal() * vty)).reshaped();
      if (const auto jump = model_jump(t, z, epsilon, n_target)) {
        // The model is convex and gradient-matched at g, so the jump
        // direction descends; damp it with its own backtracking search.
        const Vector d_jump = *jump - g;
        const double slope = grad.dot(d_jump);
        if (slope < 0.0) {
          double tj = 1.0;
          while (tj > kStepFloor) {
            Vector g_cand = g + tj * d_jump;
            reproject_feasible(g_cand);
            const double f_cand = eval_objective(g_cand);
            if (f_cand < f && f_cand <= f + config.armijo_c * tj * slope) {
              if (!accepted || f_cand < f_try) {
                g_try = std::move(g_cand);
                f_try = f_cand;
                accepted = true;
              }
              break;
            }
            tj *= config.armijo_shrink;
          }
        }
      }
    }
    if (!accepted) {
      out.converged = true;  // no feasible descent left at this precision
      break;
    }

    g_prev = g;
    grad_prev = grad;
    step_prev = step;
    have_prev = true;
    g = std::move(g_try);
    f = f_try;
    grad = eval_grad(g);
    dir = -project_ones_complement(grad);
    ++out.iterations;
  }

  out.g = std::move(g);
  out.objective = f;
  return out;
}

}  // namespace

void BdogConfig::validate() const {
  if (!(epsilon > 0.0)) {
    throw InputError("huber epsilon must be > 0");
  }
  if (max_iters < 1) {
    throw InputError("max_iters must be >= 1");
  }
  if (!(grad_tol > 0.0)) {
    throw InputError("grad_tol must be > 0");
  }
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
    throw InputError("armijo_c must be in (0, 1)");
  }
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
    throw InputError("armijo_shrink must be in (0, 1)");
  }
}

double default_huber_epsilon(const Eigen::Ref<const Matrix>& y) {
  require_finite(y, "y");
  const double mean_abs =
      norm_1_1(y) / static_cast<double>(y.rows() * y.cols());
  if (!(mean_abs > 0.0)) {
    throw InputError("cannot pick a huber knee for an all-zero observation");
  }
  return 1e-3 * mean_abs;
}

double huber(double x, double epsilon) {
  const double a = std::abs(x);
  if (a < epsilon) {
    return x * x / (2.0 * epsilon);
  }
  return a - 0.5 * epsilon;
}

double huber_deriv(double x, double epsilon) {
  if (std::abs(x) < epsilon) {
    return x / epsilon;
  }
  return x > 0.0 ? 1.0 : -1.0;
}

double smoothed_objective(const Eigen::Ref<const Vector>& g,
                          const Eigen::Ref<const Matrix>& v,
                          const Eigen::Ref<const Matrix>& y, double epsilon) {
  const Matrix z = v * (g.asDiagonal() * (v.transpose() * y));
  return z.unaryExpr([epsilon](double x) { return huber(x, epsilon); }).sum();
}

Vector objective_grad_g(const Eigen::Ref<const Vector>& g,
                        const Eigen::Ref<const Matrix>& v,
                        const Eigen::Ref<const Matrix>& y, double epsilon) {
  const Matrix vty = v.transpose() * y;
  const Matrix z = v * (g.asDiagonal() * vty);
  const Matrix d =
      z.unaryExpr([epsilon](double x) { return huber_deriv(x, epsilon); });
  return ((v.transpose() * d).cwiseProduct(vty)).rowwise().sum();
}

SolveReport solve_bdog(const Eigen::Ref<const Matrix>& y,
                       const Eigen::Ref<const Matrix>& v,
                       const BdogConfig& config,
                       const std::optional<Vector>& g_init) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  require_solver_inputs(y, v);
  const Eigen::Index n = v.rows();
  const double n_d = static_cast<double>(n);

  Vector g;
  if (g_init) {
    if (g_init->size() != n) {
      throw InputError("warm start has the wrong length");
    }
    require_finite(*g_init, "g_init");
    if (std::abs(g_init->sum() - n_d) > 1e-6 * n_d) {
      throw InputError("warm start violates the constraint 1^T g = N");
    }
    g = *g_init;
  } else {
    g = Vector::Ones(n);
  }
  reproject_feasible(g);

  const Matrix vty = v.transpose() * y;
  const Matrix t = build_linear_map(v, vty);

  // A cold start at a knee far below the observation scale faces an almost
  // nonsmooth landscape, so the knee is annealed down from the scale-aware
  // default, warm-starting each stage. Warm starts trust the caller and run
  // a single stage at the configured knee.
  std::vector<double> knees;
  if (!g_init) {
    double e0 = config.epsilon;
    if (norm_1_1(y) > 0.0) {
      e0 = std::max(default_huber_epsilon(y), config.epsilon);
    }
    for (int s = 0; e0 > config.epsilon && s < kMaxAnnealStages; ++s) {
      knees.push_back(e0);
      e0 /= 10.0;
    }
  }
  knees.push_back(config.epsilon);

  SolveReport report;
  for (std::size_t s = 0; s < knees.size(); ++s) {
    StageResult stage = descend_stage(v, vty, t, g, knees[s], config);
    g = std::move(stage.g);
    report.iterations += stage.iterations;
    report.converged = stage.converged;
    if (s + 1 == knees.size()) {
      report.objective_trace = std::move(stage.trace);
    }
  }

  report.g_hat = g;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

}  // namespace gbd
