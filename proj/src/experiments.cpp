#include "gbd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "gbd/filters.hpp"
#include "gbd/graph.hpp"
#include "gbd/io.hpp"
#include "gbd/metrics.hpp"
#include "gbd/perturbation.hpp"
#include "gbd/rng.hpp"

namespace gbd {

namespace {

constexpr const char* kToolVersion = "0.1.0";

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

bool same_id(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out += c;
    }
  }
  out += '"';
  return out;
}

std::string fmt_cell(double v) {
  return std::isnan(v) ? std::string() : format_double(v);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) {
    return quiet_nan();
  }
  double sum = 0.0;
  for (double x : v) {
    sum += x;
  }
  return sum / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return quiet_nan();
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Runs cell bodies over a shared index counter. Cell bodies own disjoint
// output slots, so the schedule cannot affect results.
void run_pool(int n_cells, int workers, const std::function<void(int)>& work) {
  workers = std::max(1, std::min(workers, n_cells));
  if (workers <= 1) {
    for (int i = 0; i < n_cells; ++i) {
      work(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n_cells) {
          return;
        }
        try {
          work(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) {
            first_error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

struct CellTruth {
  Matrix y;
  Matrix v_p;
  Vector g0;          // aligned to the solver normalization 1^T g = N
  Matrix g0_op;
  Matrix h0_op;
  Matrix x0;          // aligned likewise
};

void fill_solution_metrics(MetricRow& row, const CellTruth& truth,
                           const Vector& g_hat, const Matrix& v_hat,
                           double tau, int iterations, double wall_time_s) {
  const Matrix x_hat =
      v_hat * (g_hat.asDiagonal() * (v_hat.transpose() * truth.y));
  row.acc_x = acc_x(x_hat, truth.x0, tau);
  row.re_G = re_operator(g_operator(v_hat, g_hat), truth.g0_op);
  row.re_H = re_operator(h_operator(v_hat, g_hat), truth.h0_op);
  row.re_X = re_operator(x_hat, truth.x0);
  row.iterations = iterations;
  row.wall_time = wall_time_s;
}

void run_both_solvers(const ExperimentConfig& cfg, const CellTruth& truth,
                      bool report_re_g, MetricRow& bdog_row,
                      MetricRow& rbdogs_row) {
  try {
    const SolveReport rep =
        solve_bdog(truth.y, truth.v_p, resolved_bdog(cfg.bdog, truth.y));
    fill_solution_metrics(bdog_row, truth, rep.g_hat, truth.v_p, cfg.tau,
                          rep.iterations, rep.wall_time_s);
    if (report_re_g) {
      bdog_row.re_g = re_g(rep.g_hat, truth.g0);
    }
  } catch (const std::exception& ex) {
    bdog_row.status = ex.what();
  }
  try {
    const RbdogsReport rep =
        rbdogs(truth.y, truth.v_p, resolved_rbdogs(cfg.rbdogs, truth.y));
    fill_solution_metrics(rbdogs_row, truth, rep.g_hat, rep.v_hat, cfg.tau,
                          rep.outer_iterations, rep.wall_time_s);
    if (report_re_g) {
      rbdogs_row.re_g = re_g(rep.g_hat, truth.g0);
    }
  } catch (const std::exception& ex) {
    rbdogs_row.status = ex.what();
  }
}

// Taps h = e_1 + h' with h' standard normal scaled to unit length; draws
// whose frequency response comes too close to zero (non-invertible filter)
// or sums too close to zero (no usable scale representative) are resampled.
struct Tc2Filter {
  GraphFilter forward;
  Vector g0;
};

Tc2Filter sample_tc2_filter(const EigenBasis& basis, Eigen::Index degree,
                            std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vector hp(degree);
    for (Eigen::Index i = 0; i < degree; ++i) {
      hp(i) = rng.normal();
    }
    const double norm = hp.norm();
    if (norm == 0.0) {
      continue;
    }
    Vector taps = hp / norm;
    taps(0) += 1.0;
    GraphFilter forward = filter_from_taps(basis, taps);
    if (forward.freq_response.cwiseAbs().minCoeff() < 1e-3) {
      continue;
    }
    Vector g0 = inverse_filter(forward).freq_response;
    if (std::abs(g0.sum()) <
        1e-6 * static_cast<double>(basis.size())) {
      continue;
    }
    return {std::move(forward), std::move(g0)};
  }
  throw NumericalError("no invertible filter draw in 100 attempts");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 2) {
    throw InputError("n must be >= 2");
  }
  if (!(p_edge > 0.0 && p_edge <= 1.0)) {
    throw InputError("p_edge must lie in (0, 1]");
  }
  if (p_samples < 2) {
    throw InputError("p_samples must be >= 2");
  }
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InputError("theta must lie in (0, 1)");
  }
  if (!(tau > 0.0)) {
    throw InputError("tau must be > 0");
  }
  if (alpha_grid.empty() || target_delta_grid.empty() || p_grid.empty()) {
    throw InputError("sweep grids must be non-empty");
  }
  for (double a : alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw InputError("alpha grid entries must be finite and >= 0");
    }
  }
  for (double d : target_delta_grid) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw InputError("target delta grid entries must be finite and >= 0");
    }
  }
  for (Eigen::Index p : p_grid) {
    if (p < 2) {
      throw InputError("sample size grid entries must be >= 2");
    }
  }
  if (filter_degree < 1 || filter_degree > n) {
    throw InputError("filter_degree must lie in [1, n]");
  }
  if (n_realizations < 1) {
    throw InputError("n_realizations must be >= 1");
  }
  if (workers < 1) {
    throw InputError("workers must be >= 1");
  }
  // Solver knobs: epsilon and rho accept the non-positive auto sentinel;
  // the rest must already be valid.
  BdogConfig b = bdog;
  b.epsilon = b.epsilon > 0.0 ? b.epsilon : 1.0;
  b.validate();
  RbdogsConfig r = rbdogs;
  r.epsilon = r.epsilon > 0.0 ? r.epsilon : 1.0;
  r.rho = r.rho > 0.0 ? r.rho : 1.0;
  r.validate();
}

BdogConfig resolved_bdog(const BdogConfig& base,
                         const Eigen::Ref<const Matrix>& y) {
  BdogConfig cfg = base;
  if (!(cfg.epsilon > 0.0)) {
    cfg.epsilon = default_huber_epsilon(y);
  }
  cfg.validate();
  return cfg;
}

RbdogsConfig resolved_rbdogs(const RbdogsConfig& base,
                             const Eigen::Ref<const Matrix>& y) {
  RbdogsConfig cfg = base;
  if (!(cfg.epsilon > 0.0)) {
    cfg.epsilon = default_huber_epsilon(y);
  }
  if (!(cfg.rho > 0.0)) {
    cfg.rho = default_proximity_weight(y);
  }
  cfg.validate();
  return cfg;
}

std::vector<MetricRow> run_testcase1(const ExperimentConfig& cfg) {
  cfg.validate();
  const int na = static_cast<int>(cfg.alpha_grid.size());
  const int nd = static_cast<int>(cfg.target_delta_grid.size());
  const int nr = cfg.n_realizations;
  const int n_cells = na * nd * nr;
  std::vector<MetricRow> rows(2 * static_cast<std::size_t>(n_cells));

  for (int idx = 0; idx < n_cells; ++idx) {
    const int ia = idx / (nd * nr);
    const int id = (idx / nr) % nd;
    const int r = idx % nr;
    for (int m = 0; m < 2; ++m) {
      MetricRow& row = rows[2 * static_cast<std::size_t>(idx) +
                            static_cast<std::size_t>(m)];
      row.alpha = cfg.alpha_grid[static_cast<std::size_t>(ia)];
      row.target_delta =
          cfg.target_delta_grid[static_cast<std::size_t>(id)];
      row.sample_size = cfg.p_samples;
      row.realization = r;
      row.method = m == 0 ? "bdog" : "rbdogs";
    }
  }

  run_pool(n_cells, cfg.workers, [&](int idx) {
    const int ia = idx / (nd * nr);
    const int id = (idx / nr) % nd;
    const int r = idx % nr;
    MetricRow& bdog_row = rows[2 * static_cast<std::size_t>(idx)];
    MetricRow& rbdogs_row = rows[2 * static_cast<std::size_t>(idx) + 1];
    const std::uint64_t cell_seed = derive_seed(
        cfg.master_seed,
        {1, static_cast<std::uint64_t>(ia), static_cast<std::uint64_t>(id),
         static_cast<std::uint64_t>(r)});
    try {
      const ExperimentGraph eg = sample_experiment_graph(
          cfg.n, cfg.p_edge, derive_seed(cell_seed, {0}));
      const InversePair pair = controlled_inverse_response(
          cfg.n, bdog_row.alpha, derive_seed(cell_seed, {1}));
      const SparseSignal x0 = sample_bernoulli_gaussian(
          cfg.n, cfg.p_samples, cfg.theta, derive_seed(cell_seed, {2}));
      const GraphFilter forward = filter_from_freq(eg.basis, pair.h0);

      CellTruth truth;
      truth.y = synthesize_observations(forward, x0);
      double xi = 0.0;
      truth.v_p = eg.basis.vectors;
      if (bdog_row.target_delta > 0.0) {
        const Matrix w =
            random_unit_skew(cfg.n, derive_seed(cell_seed, {3}));
        xi = xi_for_target_delta(w, bdog_row.target_delta, 1e-10);
        truth.v_p = cayley_perturb(eg.basis.vectors, w, xi);
      }
      bdog_row.xi = xi;
      rbdogs_row.xi = xi;
      truth.g0 = pair.g0;
      truth.g0_op = g_operator(eg.basis.vectors, pair.g0);
      truth.h0_op = forward.node_operator();
      truth.x0 = x0.x;

      run_both_solvers(cfg, truth, true, bdog_row, rbdogs_row);
    } catch (const std::exception& ex) {
      bdog_row.status = ex.what();
      rbdogs_row.status = ex.what();
    }
  });
  return rows;
}

std::vector<MetricRow> run_testcase2(const ExperimentConfig& cfg) {
  cfg.validate();
  const int np = static_cast<int>(cfg.p_grid.size());
  const int nr = cfg.n_realizations;
  const int n_cells = np * nr;
  std::vector<MetricRow> rows(2 * static_cast<std::size_t>(n_cells));

  for (int idx = 0; idx < n_cells; ++idx) {
    const int ip = idx / nr;
    const int r = idx % nr;
    for (int m = 0; m < 2; ++m) {
      MetricRow& row = rows[2 * static_cast<std::size_t>(idx) +
                            static_cast<std::size_t>(m)];
      row.sample_size = cfg.p_grid[static_cast<std::size_t>(ip)];
      row.realization = r;
      row.method = m == 0 ? "bdog" : "rbdogs";
    }
  }

  run_pool(n_cells, cfg.workers, [&](int idx) {
    const int ip = idx / nr;
    const int r = idx % nr;
    MetricRow& bdog_row = rows[2 * static_cast<std::size_t>(idx)];
    MetricRow& rbdogs_row = rows[2 * static_cast<std::size_t>(idx) + 1];
    const std::uint64_t cell_seed = derive_seed(
        cfg.master_seed,
        {2, static_cast<std::uint64_t>(ip), static_cast<std::uint64_t>(r)});
    try {
      const ExperimentGraph eg = sample_experiment_graph(
          cfg.n, cfg.p_edge, derive_seed(cell_seed, {0}));
      const Tc2Filter filt = sample_tc2_filter(
          eg.basis, cfg.filter_degree, derive_seed(cell_seed, {1}));
      const SparseSignal x0 = sample_bernoulli_gaussian(
          cfg.n, bdog_row.sample_size, cfg.theta,
          derive_seed(cell_seed, {2}));

      CellTruth truth;
      truth.y = synthesize_observations(filt.forward, x0);
      truth.v_p = covariance_eigenbasis(truth.y).vectors;

      // The model is identifiable up to scale and the solvers pin
      // 1^T g = N, so compare against the ground-truth representative with
      // that normalization.
      const double scale = static_cast<double>(cfg.n) / filt.g0.sum();
      truth.g0 = scale * filt.g0;
      truth.g0_op = g_operator(eg.basis.vectors, truth.g0);
      truth.h0_op = filt.forward.node_operator() / scale;
      truth.x0 = scale * x0.x;

      run_both_solvers(cfg, truth, false, bdog_row, rbdogs_row);
    } catch (const std::exception& ex) {
      bdog_row.status = ex.what();
      rbdogs_row.status = ex.what();
    }
  });
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  struct Group {
    SummaryRow summary;
    std::vector<double> re_g, acc_x, re_G, re_H, re_X;
  };
  std::vector<Group> groups;
  for (const MetricRow& row : rows) {
    Group* group = nullptr;
    for (Group& g : groups) {
      if (same_id(g.summary.alpha, row.alpha) &&
          same_id(g.summary.target_delta, row.target_delta) &&
          g.summary.sample_size == row.sample_size &&
          g.summary.method == row.method) {
        group = &g;
        break;
      }
    }
    if (group == nullptr) {
      groups.emplace_back();
      group = &groups.back();
      group->summary.alpha = row.alpha;
      group->summary.target_delta = row.target_delta;
      group->summary.sample_size = row.sample_size;
      group->summary.method = row.method;
    }
    ++group->summary.n_rows;
    if (row.status != "ok") {
      ++group->summary.n_failed;
      continue;
    }
    const auto push = [](std::vector<double>& v, double x) {
      if (!std::isnan(x)) {
        v.push_back(x);
      }
    };
    push(group->re_g, row.re_g);
    push(group->acc_x, row.acc_x);
    push(group->re_G, row.re_G);
    push(group->re_H, row.re_H);
    push(group->re_X, row.re_X);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (Group& g : groups) {
    g.summary.mean_re_g = mean_of(g.re_g);
    g.summary.median_re_g = median_of(g.re_g);
    g.summary.mean_acc_x = mean_of(g.acc_x);
    g.summary.median_acc_x = median_of(g.acc_x);
    g.summary.mean_re_G = mean_of(g.re_G);
    g.summary.median_re_G = median_of(g.re_G);
    g.summary.mean_re_H = mean_of(g.re_H);
    g.summary.median_re_H = median_of(g.re_H);
    g.summary.mean_re_X = mean_of(g.re_X);
    g.summary.median_re_X = median_of(g.re_X);
    out.push_back(std::move(g.summary));
  }
  return out;
}

void emit_csv(const std::vector<MetricRow>& rows, std::ostream& out,
              bool include_timing) {
  out << "alpha,target_delta,xi,sample_size,realization,method,re_g,acc_x,"
         "re_G,re_H,re_X,iterations,wall_time,status\n";
  for (const MetricRow& row : rows) {
    out << fmt_cell(row.alpha) << ',' << fmt_cell(row.target_delta) << ','
        << fmt_cell(row.xi) << ',' << row.sample_size << ','
        << row.realization << ',' << csv_escape(row.method) << ','
        << fmt_cell(row.re_g) << ',' << fmt_cell(row.acc_x) << ','
        << fmt_cell(row.re_G) << ',' << fmt_cell(row.re_H) << ','
        << fmt_cell(row.re_X) << ',' << row.iterations << ','
        << (include_timing ? fmt_cell(row.wall_time) : std::string()) << ','
        << csv_escape(row.status) << '\n';
  }
}

void emit_csv(const std::vector<MetricRow>& rows, const std::string& path,
              bool include_timing) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  emit_csv(rows, out, include_timing);
  if (!out) {
    throw InputError("write to " + path + " failed");
  }
}

void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      std::ostream& out) {
  out << "alpha,target_delta,sample_size,method,n_rows,n_failed,"
         "mean_re_g,median_re_g,mean_acc_x,median_acc_x,mean_re_G,"
         "median_re_G,mean_re_H,median_re_H,mean_re_X,median_re_X\n";
  for (const SummaryRow& row : rows) {
    out << fmt_cell(row.alpha) << ',' << fmt_cell(row.target_delta) << ','
        << row.sample_size << ',' << csv_escape(row.method) << ','
        << row.n_rows << ',' << row.n_failed << ','
        << fmt_cell(row.mean_re_g) << ',' << fmt_cell(row.median_re_g) << ','
        << fmt_cell(row.mean_acc_x) << ',' << fmt_cell(row.median_acc_x)
        << ',' << fmt_cell(row.mean_re_G) << ','
        << fmt_cell(row.median_re_G) << ',' << fmt_cell(row.mean_re_H) << ','
        << fmt_cell(row.median_re_H) << ',' << fmt_cell(row.mean_re_X) << ','
        << fmt_cell(row.median_re_X) << '\n';
  }
}

void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  emit_summary_csv(rows, out);
  if (!out) {
    throw InputError("write to " + path + " failed");
  }
}

void emit_heatmap_svg(const std::vector<MetricRow>& rows, HeatmapMetric metric,
                      std::ostream& out) {
  const auto value_of = [metric](const MetricRow& row) {
    switch (metric) {
      case HeatmapMetric::kOneMinusReG:
        return 1.0 - row.re_g;
      case HeatmapMetric::kAccX:
        return row.acc_x;
      case HeatmapMetric::kOneMinusReX:
        return 1.0 - row.re_X;
    }
    return quiet_nan();
  };
  const char* metric_name =
      metric == HeatmapMetric::kOneMinusReG
          ? "mean(1 - RE_g)"
          : metric == HeatmapMetric::kAccX ? "mean(ACC_X)"
                                           : "mean(1 - RE_X)";

  bool use_target_delta = false;
  for (const MetricRow& row : rows) {
    if (!std::isnan(row.target_delta)) {
      use_target_delta = true;
      break;
    }
  }

  std::vector<double> ys;        // alpha grid (may be empty)
  std::vector<double> xs_t;      // target-delta grid
  std::vector<Eigen::Index> xs_p;  // sample-size grid
  std::vector<std::string> methods;
  for (const MetricRow& row : rows) {
    if (!std::isnan(row.alpha) &&
        std::none_of(ys.begin(), ys.end(),
                     [&](double v) { return v == row.alpha; })) {
      ys.push_back(row.alpha);
    }
    if (use_target_delta) {
      if (!std::isnan(row.target_delta) &&
          std::none_of(xs_t.begin(), xs_t.end(),
                       [&](double v) { return v == row.target_delta; })) {
        xs_t.push_back(row.target_delta);
      }
    } else if (std::none_of(xs_p.begin(), xs_p.end(), [&](Eigen::Index v) {
                 return v == row.sample_size;
               })) {
      xs_p.push_back(row.sample_size);
    }
    if (std::find(methods.begin(), methods.end(), row.method) ==
        methods.end()) {
      methods.push_back(row.method);
    }
  }
  const int ny = std::max<int>(1, static_cast<int>(ys.size()));
  const int nx = use_target_delta ? static_cast<int>(xs_t.size())
                                  : static_cast<int>(xs_p.size());
  if (nx == 0 || methods.empty()) {
    throw InputError("heatmap needs a non-empty table");
  }

  const auto cell_mean = [&](const std::string& method, int yi,
                             int xi) -> double {
    std::vector<double> vals;
    for (const MetricRow& row : rows) {
      if (row.method != method || row.status != "ok") {
        continue;
      }
      if (!ys.empty() &&
          !same_id(row.alpha, ys[static_cast<std::size_t>(yi)])) {
        continue;
      }
      if (use_target_delta) {
        if (!same_id(row.target_delta,
                     xs_t[static_cast<std::size_t>(xi)])) {
          continue;
        }
      } else if (row.sample_size != xs_p[static_cast<std::size_t>(xi)]) {
        continue;
      }
      const double v = value_of(row);
      if (!std::isnan(v)) {
        vals.push_back(v);
      }
    }
    return mean_of(vals);
  };

  const int cell = 46;
  const int ml = 64;
  const int mt = 42;
  const int mb = 52;
  const int panel_w = ml + nx * cell + 10;
  const int gap = 36;
  const int width =
      static_cast<int>(methods.size()) * panel_w +
      (static_cast<int>(methods.size()) - 1) * gap + 8;
  const int height = mt + ny * cell + mb;

  char buf[64];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\""
      << height << "\" fill=\"#ffffff\"/>\n";
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const int ox = static_cast<int>(mi) * (panel_w + gap);
    out << "<text x=\"" << ox + ml << "\" y=\"20\" font-family=\"monospace\""
        << " font-size=\"14\">" << methods[mi] << ": " << metric_name
        << "</text>\n";
    for (int yi = 0; yi < ny; ++yi) {
      for (int xi = 0; xi < nx; ++xi) {
        const double v = cell_mean(methods[mi], yi, xi);
        const int px = ox + ml + xi * cell;
        const int py = mt + yi * cell;
        if (std::isnan(v)) {
          out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\""
              << cell << "\" height=\"" << cell
              << "\" fill=\"none\" stroke=\"#999999\"/>\n";
          continue;
        }
        const double clipped = std::min(1.0, std::max(0.0, v));
        const int level = static_cast<int>(std::lround(255.0 * clipped));
        out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell
            << "\" height=\"" << cell << "\" fill=\"rgb(" << level << ','
            << level << ',' << level << ")\" stroke=\"#999999\"/>\n";
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        out << "<text x=\"" << px + cell / 2 << "\" y=\"" << py + cell / 2 + 4
            << "\" font-family=\"monospace\" font-size=\"11\""
            << " text-anchor=\"middle\" fill=\""
            << (level < 128 ? "#ffffff" : "#000000") << "\">" << buf
            << "</text>\n";
      }
    }
    for (int xi = 0; xi < nx; ++xi) {
      const std::string label =
          use_target_delta
              ? format_double(xs_t[static_cast<std::size_t>(xi)])
              : std::to_string(xs_p[static_cast<std::size_t>(xi)]);
      out << "<text x=\"" << ox + ml + xi * cell + cell / 2 << "\" y=\""
          << mt + ny * cell + 16
          << "\" font-family=\"monospace\" font-size=\"12\""
          << " text-anchor=\"middle\">" << label << "</text>\n";
    }
    out << "<text x=\"" << ox + ml + (nx * cell) / 2 << "\" y=\""
        << mt + ny * cell + 38
        << "\" font-family=\"monospace\" font-size=\"12\""
        << " text-anchor=\"middle\">"
        << (use_target_delta ? "target |Delta|_F" : "sample size P")
        << "</text>\n";
    if (!ys.empty()) {
      for (int yi = 0; yi < ny; ++yi) {
        out << "<text x=\"" << ox + ml - 6 << "\" y=\""
            << mt + yi * cell + cell / 2 + 4
            << "\" font-family=\"monospace\" font-size=\"12\""
            << " text-anchor=\"end\">"
            << format_double(ys[static_cast<std::size_t>(yi)])
            << "</text>\n";
      }
      out << "<text x=\"" << ox + 14 << "\" y=\"" << mt - 8
          << "\" font-family=\"monospace\" font-size=\"12\">alpha</text>\n";
    }
  }
  out << "</svg>\n";
}

void emit_heatmap_svg(const std::vector<MetricRow>& rows, HeatmapMetric metric,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  emit_heatmap_svg(rows, metric, out);
  if (!out) {
    throw InputError("write to " + path + " failed");
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  using nlohmann::json;
  ExperimentConfig cfg;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) {
      throw InputError("config must be a JSON object");
    }
    const auto check_keys = [](const json& obj,
                               const std::vector<std::string>& allowed,
                               const std::string& where) {
      for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) ==
            allowed.end()) {
          throw InputError("unknown config key: " + where + item.key());
        }
      }
    };
    check_keys(j,
               {"n", "p_edge", "p_samples", "theta", "tau", "alpha_grid",
                "target_delta_grid", "p_grid", "filter_degree",
                "n_realizations", "master_seed", "workers", "bdog", "rbdogs"},
               "");
    if (j.contains("n")) cfg.n = j.at("n").get<Eigen::Index>();
    if (j.contains("p_edge")) cfg.p_edge = j.at("p_edge").get<double>();
    if (j.contains("p_samples"))
      cfg.p_samples = j.at("p_samples").get<Eigen::Index>();
    if (j.contains("theta")) cfg.theta = j.at("theta").get<double>();
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("alpha_grid"))
      cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
    if (j.contains("target_delta_grid"))
      cfg.target_delta_grid =
          j.at("target_delta_grid").get<std::vector<double>>();
    if (j.contains("p_grid"))
      cfg.p_grid = j.at("p_grid").get<std::vector<Eigen::Index>>();
    if (j.contains("filter_degree"))
      cfg.filter_degree = j.at("filter_degree").get<Eigen::Index>();
    if (j.contains("n_realizations"))
      cfg.n_realizations = j.at("n_realizations").get<int>();
    if (j.contains("master_seed"))
      cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    if (j.contains("bdog")) {
      const json& b = j.at("bdog");
      check_keys(b,
                 {"epsilon", "max_iters", "grad_tol", "armijo_c",
                  "armijo_shrink"},
                 "bdog.");
      if (b.contains("epsilon"))
        cfg.bdog.epsilon = b.at("epsilon").get<double>();
      if (b.contains("max_iters"))
        cfg.bdog.max_iters = b.at("max_iters").get<int>();
      if (b.contains("grad_tol"))
        cfg.bdog.grad_tol = b.at("grad_tol").get<double>();
      if (b.contains("armijo_c"))
        cfg.bdog.armijo_c = b.at("armijo_c").get<double>();
      if (b.contains("armijo_shrink"))
        cfg.bdog.armijo_shrink = b.at("armijo_shrink").get<double>();
    }
    if (j.contains("rbdogs")) {
      const json& r = j.at("rbdogs");
      check_keys(r,
                 {"rho", "epsilon", "delta_stop", "max_outer",
                  "inner_max_iters", "inner_grad_tol", "armijo_c",
                  "armijo_shrink", "ortho_refresh_tol"},
                 "rbdogs.");
      if (r.contains("rho")) cfg.rbdogs.rho = r.at("rho").get<double>();
      if (r.contains("epsilon"))
        cfg.rbdogs.epsilon = r.at("epsilon").get<double>();
      if (r.contains("delta_stop"))
        cfg.rbdogs.delta_stop = r.at("delta_stop").get<double>();
      if (r.contains("max_outer"))
        cfg.rbdogs.max_outer = r.at("max_outer").get<int>();
      if (r.contains("inner_max_iters"))
        cfg.rbdogs.inner_max_iters = r.at("inner_max_iters").get<int>();
      if (r.contains("inner_grad_tol"))
        cfg.rbdogs.inner_grad_tol = r.at("inner_grad_tol").get<double>();
      if (r.contains("armijo_c"))
        cfg.rbdogs.armijo_c = r.at("armijo_c").get<double>();
      if (r.contains("armijo_shrink"))
        cfg.rbdogs.armijo_shrink = r.at("armijo_shrink").get<double>();
      if (r.contains("ortho_refresh_tol"))
        cfg.rbdogs.ortho_refresh_tol =
            r.at("ortho_refresh_tol").get<double>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("config parse error: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["p_edge"] = cfg.p_edge;
  j["p_samples"] = cfg.p_samples;
  j["theta"] = cfg.theta;
  j["tau"] = cfg.tau;
  j["alpha_grid"] = cfg.alpha_grid;
  j["target_delta_grid"] = cfg.target_delta_grid;
  j["p_grid"] = cfg.p_grid;
  j["filter_degree"] = cfg.filter_degree;
  j["n_realizations"] = cfg.n_realizations;
  j["master_seed"] = cfg.master_seed;
  j["workers"] = cfg.workers;
  j["bdog"] = {{"epsilon", cfg.bdog.epsilon},
               {"max_iters", cfg.bdog.max_iters},
               {"grad_tol", cfg.bdog.grad_tol},
               {"armijo_c", cfg.bdog.armijo_c},
               {"armijo_shrink", cfg.bdog.armijo_shrink}};
  j["rbdogs"] = {{"rho", cfg.rbdogs.rho},
                 {"epsilon", cfg.rbdogs.epsilon},
                 {"delta_stop", cfg.rbdogs.delta_stop},
                 {"max_outer", cfg.rbdogs.max_outer},
                 {"inner_max_iters", cfg.rbdogs.inner_max_iters},
                 {"inner_grad_tol", cfg.rbdogs.inner_grad_tol},
                 {"armijo_c", cfg.rbdogs.armijo_c},
                 {"armijo_shrink", cfg.rbdogs.armijo_shrink},
                 {"ortho_refresh_tol", cfg.rbdogs.ortho_refresh_tol}};
  return j.dump(2);
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    std::ostream& out) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = nlohmann::json::parse(experiment_config_json(cfg));
  j["master_seed"] = cfg.master_seed;
  j["tool"] = "gbd";
  j["version"] = kToolVersion;
  out << j.dump(2) << '\n';
}

void write_testcase_artifacts(const ExperimentConfig& cfg,
                              const std::vector<MetricRow>& rows,
                              const std::string& command,
                              const std::string& prefix,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  emit_csv(rows, (dir / (prefix + "_raw.csv")).string());
  emit_summary_csv(summarize(rows), (dir / (prefix + "_summary.csv")).string());
  bool has_re_g = false;
  for (const MetricRow& row : rows) {
    if (!std::isnan(row.re_g)) {
      has_re_g = true;
      break;
    }
  }
  if (has_re_g) {
    emit_heatmap_svg(rows, HeatmapMetric::kOneMinusReG,
                     (dir / (prefix + "_reg.svg")).string());
  } else {
    emit_heatmap_svg(rows, HeatmapMetric::kOneMinusReX,
                     (dir / (prefix + "_rex.svg")).string());
  }
  emit_heatmap_svg(rows, HeatmapMetric::kAccX,
                   (dir / (prefix + "_accx.svg")).string());
  std::ofstream manifest((dir / "manifest.json").string());
  if (!manifest) {
    throw InputError("cannot open manifest.json for writing");
  }
  write_manifest(cfg, command, manifest);
}

BoundCalibration calibrate_stability_constant(const ExperimentConfig& cfg,
                                              double alpha,
                                              double target_delta, int n_train,
                                              int n_holdout, double margin) {
  cfg.validate();
  if (!(alpha >= 0.0)) {
    throw InputError("alpha must be >= 0");
  }
  if (!(target_delta > 0.0)) {
    throw InputError("calibration needs a nonzero perturbation");
  }
  if (n_train < 1 || n_holdout < 1) {
    throw InputError("calibration needs at least one training and one "
                     "holdout instance");
  }
  if (!(margin > 0.0 && margin <= 1.0)) {
    throw InputError("margin must lie in (0, 1]");
  }

  const BoundParams params = BoundParams::defaults_for_theta(cfg.theta);

  struct Instance {
    double error;       // ||g_hat - g0||_2 from the perturbed-basis solve
    double numerator;   // bound numerator, independent of c1
    double d0;          // a0 ||E_comp||_{1,1} + Khatri-Rao term
    double pq1;         // P * Q at c1 = 1; Q scales linearly in c1
  };

  const auto eval_instance = [&](int k) -> std::optional<Instance> {
    const std::uint64_t cell_seed = derive_seed(
        cfg.master_seed, {3, static_cast<std::uint64_t>(k)});
    const ExperimentGraph eg = sample_experiment_graph(
        cfg.n, cfg.p_edge, derive_seed(cell_seed, {0}));
    const InversePair pair = controlled_inverse_response(
        cfg.n, alpha, derive_seed(cell_seed, {1}));
    const SparseSignal x0 = sample_bernoulli_gaussian(
        cfg.n, cfg.p_samples, cfg.theta, derive_seed(cell_seed, {2}));
    const GraphFilter forward = filter_from_freq(eg.basis, pair.h0);
    const Matrix y = synthesize_observations(forward, x0);
    const Matrix w = random_unit_skew(cfg.n, derive_seed(cell_seed, {3}));
    const double xi = xi_for_target_delta(w, target_delta, 1e-10);
    const Matrix v_p = cayley_perturb(eg.basis.vectors, w, xi);

    const A0Result a0 = recovery_threshold_a0(eg.basis.vectors, params);
    const std::optional<double> q1 = q_factor(pair.g0, a0.value, params);
    if (!q1 || !(*q1 > 0.0)) {
      return std::nullopt;  // recovery precondition fails on this draw
    }
    const SolveReport rep =
        solve_bdog(y, v_p, resolved_bdog(cfg.bdog, y));
    const Matrix e =
        error_matrix_e(eg.basis.vectors, v_p, pair.g0, pair.h0, x0.x);
    const Matrix e_comp = restrict_complement(e, x0.omega);
    const StabilityBound sb = stability_bound(
        pair.g0, e_comp, eg.basis.vectors, a0.value, *q1, cfg.p_samples);
    Instance inst;
    inst.error = (rep.g_hat - pair.g0).norm();
    inst.numerator = sb.numerator;
    inst.pq1 = static_cast<double>(cfg.p_samples) * *q1;
    inst.d0 = inst.pq1 - sb.denominator;
    return inst;
  };

  BoundCalibration result;
  result.margin = margin;
  double min_crit = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_train; ++k) {
    ++result.train_total;
    const auto inst = eval_instance(k);
    if (!inst) {
      continue;
    }
    ++result.train_usable;
    if (inst->error > 0.0) {
      const double crit =
          (inst->numerator / inst->error + inst->d0) / inst->pq1;
      min_crit = std::min(min_crit, crit);
    }
  }
  if (result.train_usable == 0 || !std::isfinite(min_crit)) {
    throw NumericalError("calibration found no usable training instance");
  }
  result.min_critical_c1 = min_crit;
  result.c1 = margin * min_crit;

  for (int k = n_train; k < n_train + n_holdout; ++k) {
    ++result.holdout_total;
    const auto inst = eval_instance(k);
    if (!inst) {
      continue;
    }
    const double denominator = result.c1 * inst->pq1 - inst->d0;
    if (denominator > 0.0) {
      ++result.holdout_feasible;
      if (inst->numerator / denominator >= inst->error - 1e-12) {
        ++result.holdout_held;
      }
    }
  }
  return result;
}

}  // namespace gbd
