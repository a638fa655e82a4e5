#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gbd/experiments.hpp"

using gbd::ExperimentConfig;
using gbd::Matrix;
using gbd::MetricRow;
using gbd::Vector;

namespace {

ExperimentConfig mini_config() {
  ExperimentConfig cfg;
  cfg.n = 10;
  cfg.p_edge = 0.5;
  cfg.p_samples = 12;
  cfg.theta = 0.2;
  cfg.alpha_grid = {0.0, 0.3};
  cfg.target_delta_grid = {0.0, 0.5};
  cfg.p_grid = {10, 20};
  cfg.n_realizations = 2;
  cfg.master_seed = 71;
  return cfg;
}

MetricRow fixture_row(double alpha, double delta, const std::string& method,
                      double re_g_val, double acc, const std::string& status) {
  MetricRow row;
  row.alpha = alpha;
  row.target_delta = delta;
  row.xi = delta;  // placeholder identifier, value is irrelevant here
  row.sample_size = 60;
  row.method = method;
  row.re_g = re_g_val;
  row.acc_x = acc;
  row.re_G = re_g_val;
  row.re_H = re_g_val;
  row.re_X = re_g_val;
  row.iterations = 10;
  row.status = status;
  return row;
}

std::vector<MetricRow> fixture_rows() {
  std::vector<MetricRow> rows;
  rows.push_back(fixture_row(0.0, 0.0, "bdog", 0.01, 1.0, "ok"));
  rows.push_back(fixture_row(0.0, 0.0, "bdog", 0.03, 0.9, "ok"));
  rows.push_back(fixture_row(0.0, 1.0, "bdog", 0.2, 0.8, "ok"));
  rows.push_back(fixture_row(0.4, 0.0, "bdog", 0.05, 0.95, "ok"));
  rows.push_back(fixture_row(0.4, 1.0, "bdog", 0.5, 0.6, "ok"));
  rows.push_back(fixture_row(0.0, 0.0, "rbdogs", 0.02, 1.0, "ok"));
  rows.push_back(fixture_row(0.0, 1.0, "rbdogs", 0.1, 0.9, "ok"));
  rows.push_back(fixture_row(0.4, 0.0, "rbdogs", 0.04, 0.97, "ok"));
  rows.push_back(fixture_row(0.4, 1.0, "rbdogs", 9.0, 0.0, "line search died"));
  return rows;
}

}  // namespace

TEST_CASE("config serializes and parses back unchanged") {
  ExperimentConfig cfg = mini_config();
  cfg.bdog.epsilon = 0.05;
  cfg.rbdogs.rho = 2.5;
  cfg.workers = 3;
  const ExperimentConfig back =
      gbd::parse_experiment_config(gbd::experiment_config_json(cfg));
  CHECK(back.n == cfg.n);
  CHECK(back.p_edge == cfg.p_edge);
  CHECK(back.p_samples == cfg.p_samples);
  CHECK(back.theta == cfg.theta);
  CHECK(back.tau == cfg.tau);
  CHECK(back.alpha_grid == cfg.alpha_grid);
  CHECK(back.target_delta_grid == cfg.target_delta_grid);
  CHECK(back.p_grid == cfg.p_grid);
  CHECK(back.filter_degree == cfg.filter_degree);
  CHECK(back.n_realizations == cfg.n_realizations);
  CHECK(back.master_seed == cfg.master_seed);
  CHECK(back.workers == cfg.workers);
  CHECK(back.bdog.epsilon == cfg.bdog.epsilon);
  CHECK(back.bdog.max_iters == cfg.bdog.max_iters);
  CHECK(back.rbdogs.rho == cfg.rbdogs.rho);
  CHECK(back.rbdogs.delta_stop == cfg.rbdogs.delta_stop);
}

TEST_CASE("config parser rejects junk") {
  CHECK_THROWS_AS(gbd::parse_experiment_config("{ not json"),
                  gbd::InputError);
  CHECK_THROWS_AS(gbd::parse_experiment_config("[1, 2]"), gbd::InputError);
  CHECK_THROWS_AS(gbd::parse_experiment_config("{\"n_nodes\": 10}"),
                  gbd::InputError);
  CHECK_THROWS_AS(
      gbd::parse_experiment_config("{\"bdog\": {\"espilon\": 0.1}}"),
      gbd::InputError);
  CHECK_THROWS_AS(
      gbd::parse_experiment_config("{\"rbdogs\": {\"rho\": \"hi\"}}"),
      gbd::InputError);
  CHECK_THROWS_AS(gbd::parse_experiment_config("{\"n\": 1}"),
                  gbd::InputError);
  CHECK_THROWS_AS(gbd::parse_experiment_config("{\"theta\": 0.0}"),
                  gbd::InputError);
  CHECK_THROWS_AS(gbd::parse_experiment_config("{\"alpha_grid\": []}"),
                  gbd::InputError);
  // Defaults alone are fine.
  const ExperimentConfig cfg = gbd::parse_experiment_config("{}");
  CHECK(cfg.n == 20);
}

TEST_CASE("auto solver knobs resolve from the observation scale") {
  Matrix y(2, 2);
  y << 1.0, -1.0, 2.0, -4.0;  // ||Y||_11 = 8, mean abs 2
  gbd::BdogConfig b;
  b.epsilon = 0.0;
  CHECK(gbd::resolved_bdog(b, y).epsilon == doctest::Approx(2e-3));
  b.epsilon = 0.7;
  CHECK(gbd::resolved_bdog(b, y).epsilon == 0.7);

  gbd::RbdogsConfig r;
  r.epsilon = 0.0;
  r.rho = 0.0;
  const auto resolved = gbd::resolved_rbdogs(r, y);
  CHECK(resolved.epsilon == doctest::Approx(2e-3));
  CHECK(resolved.rho == doctest::Approx(2.0));  // 8 / n^2
}

TEST_CASE("raw CSV bytes are exactly specified") {
  std::vector<MetricRow> rows;
  MetricRow a;  // identifiers only, metrics missing
  a.alpha = 0.5;
  a.target_delta = 1.0;
  a.xi = 0.25;
  a.sample_size = 60;
  a.realization = 3;
  a.method = "bdog";
  a.re_g = 0.125;
  a.acc_x = 1.0;
  a.re_G = 0.5;
  a.re_H = 0.25;
  a.re_X = 0.75;
  a.iterations = 42;
  a.wall_time = 9.5;
  rows.push_back(a);

  MetricRow b;  // tc2-style row: alpha/target/xi/re_g all missing
  b.sample_size = 30;
  b.realization = 0;
  b.method = "rbdogs";
  b.status = "solver, failed";
  rows.push_back(b);

  std::stringstream ss;
  gbd::emit_csv(rows, ss);
  CHECK(ss.str() ==
        "alpha,target_delta,xi,sample_size,realization,method,re_g,acc_x,"
        "re_G,re_H,re_X,iterations,wall_time,status\n"
        "0.5,1,0.25,60,3,bdog,0.125,1,0.5,0.25,0.75,42,,ok\n"
        ",,,30,0,rbdogs,,,,,,0,,\"solver, failed\"\n");

  // Timing cells appear only on request.
  std::stringstream timed;
  gbd::emit_csv(rows, timed, true);
  CHECK(timed.str().find(",42,9.5,ok") != std::string::npos);
}

TEST_CASE("summaries aggregate per cell and skip failures") {
  const auto rows = fixture_rows();
  const auto summary = gbd::summarize(rows);
  REQUIRE(summary.size() == 8);  // 4 cells x 2 methods, one group each

  // First group: alpha 0, delta 0, bdog with two realizations.
  const auto& g0 = summary[0];
  CHECK(g0.method == "bdog");
  CHECK(g0.n_rows == 2);
  CHECK(g0.n_failed == 0);
  CHECK(g0.mean_re_g == doctest::Approx(0.02));
  CHECK(g0.median_re_g == doctest::Approx(0.02));
  CHECK(g0.mean_acc_x == doctest::Approx(0.95));

  // The failed rbdogs cell is counted but contributes no statistics.
  bool found_failed = false;
  for (const auto& s : summary) {
    if (s.method == "rbdogs" && s.alpha == 0.4 && s.target_delta == 1.0) {
      found_failed = true;
      CHECK(s.n_rows == 1);
      CHECK(s.n_failed == 1);
      CHECK(std::isnan(s.mean_re_g));
      CHECK(std::isnan(s.median_acc_x));
    }
  }
  CHECK(found_failed);

  std::stringstream ss;
  gbd::emit_summary_csv(summary, ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header ==
        "alpha,target_delta,sample_size,method,n_rows,n_failed,mean_re_g,"
        "median_re_g,mean_acc_x,median_acc_x,mean_re_G,median_re_G,"
        "mean_re_H,median_re_H,mean_re_X,median_re_X");
  std::string first;
  std::getline(ss, first);
  CHECK(first == "0,0,60,bdog,2,0,0.02,0.02,0.95,0.95,0.02,0.02,0.02,0.02,"
                 "0.02,0.02");
}

TEST_CASE("median is order-independent and handles odd counts") {
  std::vector<MetricRow> rows;
  for (double v : {0.9, 0.1, 0.5}) {
    rows.push_back(fixture_row(0.0, 0.0, "bdog", v, v, "ok"));
  }
  const auto summary = gbd::summarize(rows);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].median_re_g == doctest::Approx(0.5));
  CHECK(summary[0].mean_re_g == doctest::Approx(0.5));
}

TEST_CASE("heatmap fixture matches the golden bytes") {
  std::stringstream ss;
  gbd::emit_heatmap_svg(fixture_rows(), gbd::HeatmapMetric::kOneMinusReG, ss);
  const std::string svg = ss.str();

  // Structure: one panel per method, mean(1 - re_g) values, a blank cell
  // for the all-failed group, labeled axes.
  CHECK(svg.find("bdog: mean(1 - RE_g)") != std::string::npos);
  CHECK(svg.find("rbdogs: mean(1 - RE_g)") != std::string::npos);
  CHECK(svg.find(">0.98<") != std::string::npos);   // 1 - mean(0.01, 0.03)
  CHECK(svg.find(">0.5<") != std::string::npos);    // bdog at (0.4, 1)
  CHECK(svg.find("fill=\"none\"") != std::string::npos);
  CHECK(svg.find("target |Delta|_F") != std::string::npos);
  CHECK(svg.find("alpha") != std::string::npos);

  const std::string golden_path =
      std::string(GBD_GOLDEN_DIR) + "/heatmap_fixture.svg";
  if (std::getenv("GBD_UPDATE_GOLDEN") != nullptr) {
    std::ofstream out(golden_path, std::ios::binary);
    out << svg;
    REQUIRE(out.good());
    return;
  }
  std::ifstream in(golden_path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(),
                  "golden file missing; rerun with GBD_UPDATE_GOLDEN=1");
  std::stringstream golden;
  golden << in.rdbuf();
  CHECK(svg == golden.str());
}

TEST_CASE("first sweep runs the full grid in order and deterministically") {
  ExperimentConfig cfg = mini_config();
  const auto rows = gbd::run_testcase1(cfg);
  REQUIRE(rows.size() == 2 * 2 * 2 * 2);  // alphas x deltas x reals x methods

  // Grid order with the method pair innermost.
  int idx = 0;
  for (double alpha : cfg.alpha_grid) {
    for (double delta : cfg.target_delta_grid) {
      for (int r = 0; r < cfg.n_realizations; ++r) {
        CHECK(rows[idx].alpha == alpha);
        CHECK(rows[idx].target_delta == delta);
        CHECK(rows[idx].realization == r);
        CHECK(rows[idx].method == "bdog");
        CHECK(rows[idx + 1].method == "rbdogs");
        ++idx;
        ++idx;
      }
    }
  }

  for (const auto& row : rows) {
    REQUIRE(row.status == "ok");
    CHECK(!std::isnan(row.re_g));
    CHECK(!std::isnan(row.acc_x));
    CHECK(!std::isnan(row.re_X));
    CHECK(row.sample_size == cfg.p_samples);
    if (row.target_delta == 0.0) {
      CHECK(row.xi == 0.0);
    } else {
      CHECK(row.xi > 0.0);
    }
  }

  // Same bytes no matter how many workers carried the cells.
  std::stringstream one;
  gbd::emit_csv(rows, one);
  cfg.workers = 3;
  const auto rows3 = gbd::run_testcase1(cfg);
  std::stringstream three;
  gbd::emit_csv(rows3, three);
  CHECK(one.str() == three.str());
}

TEST_CASE("second sweep estimates the basis and skips response errors") {
  ExperimentConfig cfg = mini_config();
  const auto rows = gbd::run_testcase2(cfg);
  REQUIRE(rows.size() == 2 * 2 * 2);  // sample sizes x reals x methods

  for (const auto& row : rows) {
    REQUIRE(row.status == "ok");
    CHECK(std::isnan(row.alpha));
    CHECK(std::isnan(row.target_delta));
    CHECK(std::isnan(row.xi));
    CHECK(std::isnan(row.re_g));  // covariance basis has its own ordering
    CHECK(!std::isnan(row.re_X));
    CHECK(!std::isnan(row.acc_x));
    CHECK((row.sample_size == 10 || row.sample_size == 20));
  }
}

TEST_CASE("artifact writer emits the advertised files") {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = mini_config();
  const auto rows = gbd::run_testcase1(cfg);
  const std::string dir = "test_artifacts_tc1";
  fs::remove_all(dir);
  gbd::write_testcase_artifacts(cfg, rows, "unit-test", "tc1", dir);
  CHECK(fs::exists(fs::path(dir) / "tc1_raw.csv"));
  CHECK(fs::exists(fs::path(dir) / "tc1_summary.csv"));
  CHECK(fs::exists(fs::path(dir) / "tc1_reg.svg"));  // re_g present in tc1
  CHECK(fs::exists(fs::path(dir) / "tc1_accx.svg"));
  CHECK(fs::exists(fs::path(dir) / "manifest.json"));

  std::ifstream manifest(fs::path(dir) / "manifest.json");
  std::stringstream ms;
  ms << manifest.rdbuf();
  CHECK(ms.str().find("\"command\": \"unit-test\"") != std::string::npos);
  CHECK(ms.str().find("\"master_seed\": 71") != std::string::npos);
  fs::remove_all(dir);

  // tc2 rows carry no re_g, so the signal-error heatmap is written instead.
  const auto rows2 = gbd::run_testcase2(cfg);
  const std::string dir2 = "test_artifacts_tc2";
  fs::remove_all(dir2);
  gbd::write_testcase_artifacts(cfg, rows2, "unit-test", "tc2", dir2);
  CHECK(fs::exists(fs::path(dir2) / "tc2_rex.svg"));
  CHECK(!fs::exists(fs::path(dir2) / "tc2_reg.svg"));
  fs::remove_all(dir2);
}

TEST_CASE("stability-constant calibration returns a guarded fit") {
  ExperimentConfig cfg = mini_config();
  cfg.n = 12;
  cfg.p_samples = 20;
  const auto fit =
      gbd::calibrate_stability_constant(cfg, 0.2, 0.5, 3, 3, 0.5);
  CHECK(fit.margin == 0.5);
  CHECK(fit.train_total == 3);
  CHECK(fit.train_usable >= 1);
  CHECK(fit.min_critical_c1 > 0.0);
  CHECK(fit.c1 == doctest::Approx(0.5 * fit.min_critical_c1));
  CHECK(fit.holdout_total == 3);
  CHECK(fit.holdout_feasible <= 3);
  CHECK(fit.holdout_held <= fit.holdout_feasible);

  CHECK_THROWS_AS(gbd::calibrate_stability_constant(cfg, 0.2, 0.0, 3, 3, 0.5),
                  gbd::InputError);
  CHECK_THROWS_AS(gbd::calibrate_stability_constant(cfg, 0.2, 0.5, 0, 3, 0.5),
                  gbd::InputError);
  CHECK_THROWS_AS(gbd::calibrate_stability_constant(cfg, 0.2, 0.5, 3, 3, 1.5),
                  gbd::InputError);
}
