#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "gbd/bdog.hpp"
#include "gbd/bounds.hpp"
#include "gbd/linalg.hpp"
#include "gbd/rbdogs.hpp"

namespace gbd {

/// Sweep settings shared by both experiment test cases. Solver knobs with a
/// non-positive value select the scale-aware per-instance default.
struct ExperimentConfig {
  Eigen::Index n = 20;
  double p_edge = 0.4;
  Eigen::Index p_samples = 60;
  double theta = 0.15;
  double tau = 0.1;
  std::vector<double> alpha_grid{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<double> target_delta_grid{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  // Sample sizes for the covariance-basis study. At small P/N the sample
  // covariance of the observations has near-null directions that break the
  // deconvolution for every method, so the grid starts where the
  // estimators are informative (about 12N) and doubles from there.
  std::vector<Eigen::Index> p_grid{240, 480, 960, 1920};
  Eigen::Index filter_degree = 5;
  int n_realizations = 20;
  std::uint64_t master_seed = 1;
  int workers = 1;
  BdogConfig bdog = [] {
    BdogConfig c;
    c.epsilon = 0.0;  // auto
    return c;
  }();
  RbdogsConfig rbdogs = [] {
    RbdogsConfig c;
    c.rho = 0.0;      // auto
    c.epsilon = 0.0;  // auto
    return c;
  }();

  void validate() const;
};

/// JSON round-trip for the config; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_json(const ExperimentConfig& cfg);

/// Fills the auto (non-positive) solver knobs from the observation scale.
BdogConfig resolved_bdog(const BdogConfig& base,
                         const Eigen::Ref<const Matrix>& y);
RbdogsConfig resolved_rbdogs(const RbdogsConfig& base,
                             const Eigen::Ref<const Matrix>& y);

/// One solver run on one grid cell. Identifier columns that do not apply to
/// a test case stay NaN and serialize as empty CSV cells.
struct MetricRow {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double target_delta = std::numeric_limits<double>::quiet_NaN();
  double xi = std::numeric_limits<double>::quiet_NaN();
  Eigen::Index sample_size = 0;
  int realization = 0;
  std::string method;
  double re_g = std::numeric_limits<double>::quiet_NaN();
  double acc_x = std::numeric_limits<double>::quiet_NaN();
  double re_G = std::numeric_limits<double>::quiet_NaN();
  double re_H = std::numeric_limits<double>::quiet_NaN();
  double re_X = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double wall_time = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

/// Per-cell mean/median aggregates, grouped by (alpha, target_delta,
/// sample_size, method) in first-appearance order. Failed rows are counted
/// but excluded from the statistics.
struct SummaryRow {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double target_delta = std::numeric_limits<double>::quiet_NaN();
  Eigen::Index sample_size = 0;
  std::string method;
  int n_rows = 0;
  int n_failed = 0;
  double mean_re_g = std::numeric_limits<double>::quiet_NaN();
  double median_re_g = std::numeric_limits<double>::quiet_NaN();
  double mean_acc_x = std::numeric_limits<double>::quiet_NaN();
  double median_acc_x = std::numeric_limits<double>::quiet_NaN();
  double mean_re_G = std::numeric_limits<double>::quiet_NaN();
  double median_re_G = std::numeric_limits<double>::quiet_NaN();
  double mean_re_H = std::numeric_limits<double>::quiet_NaN();
  double median_re_H = std::numeric_limits<double>::quiet_NaN();
  double mean_re_X = std::numeric_limits<double>::quiet_NaN();
  double median_re_X = std::numeric_limits<double>::quiet_NaN();
};

/// Sweep over (alpha, target ||Delta||_F, realization): known graph basis
/// perturbed by a Cayley rotation of the requested magnitude, both solvers
/// run per cell. Rows appear in grid order regardless of worker count; every
/// cell's randomness derives from (master_seed, cell indices) alone.
std::vector<MetricRow> run_testcase1(const ExperimentConfig& cfg);

/// Sweep over (sample size, realization): taps-built filter, basis estimated
/// from the sample covariance of the observations. Node-domain metrics only;
/// the covariance basis has its own frequency ordering, so re_g stays NaN.
std::vector<MetricRow> run_testcase2(const ExperimentConfig& cfg);

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

/// Raw-table CSV with a fixed header, byte-deterministic. Wall-clock cells
/// are left empty unless include_timing is set, keeping reruns comparable.
void emit_csv(const std::vector<MetricRow>& rows, std::ostream& out,
              bool include_timing = false);
void emit_csv(const std::vector<MetricRow>& rows, const std::string& path,
              bool include_timing = false);

void emit_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      const std::string& path);

enum class HeatmapMetric { kOneMinusReG, kAccX, kOneMinusReX };

/// Grayscale heatmap of per-cell means (white = 1, black = 0), one panel per
/// method. The x axis is the target-delta grid when present (test case 1)
/// and the sample-size grid otherwise; the y axis is the alpha grid.
void emit_heatmap_svg(const std::vector<MetricRow>& rows, HeatmapMetric metric,
                      std::ostream& out);
void emit_heatmap_svg(const std::vector<MetricRow>& rows, HeatmapMetric metric,
                      const std::string& path);

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    std::ostream& out);

/// Writes <prefix>_raw.csv, <prefix>_summary.csv, the two heatmaps and
/// manifest.json into out_dir.
void write_testcase_artifacts(const ExperimentConfig& cfg,
                              const std::vector<MetricRow>& rows,
                              const std::string& command,
                              const std::string& prefix,
                              const std::string& out_dir);

/// Fit of the stability bound's universal constant. Training picks the
/// largest constant that keeps the bound valid on every usable training
/// instance, shrunk by a safety margin; the holdout counts how often the
/// bound holds where its denominator is positive.
struct BoundCalibration {
  double c1 = 0.0;
  double min_critical_c1 = 0.0;
  double margin = 0.5;
  int train_total = 0;
  int train_usable = 0;
  int holdout_total = 0;
  int holdout_feasible = 0;
  int holdout_held = 0;
};

BoundCalibration calibrate_stability_constant(const ExperimentConfig& cfg,
                                              double alpha,
                                              double target_delta, int n_train,
                                              int n_holdout,
                                              double margin = 0.5);

}  // namespace gbd
