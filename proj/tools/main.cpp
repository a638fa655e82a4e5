#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gbd/bdog.hpp"
#include "gbd/bounds.hpp"
#include "gbd/experiments.hpp"
#include "gbd/filters.hpp"
#include "gbd/graph.hpp"
#include "gbd/io.hpp"
#include "gbd/perturbation.hpp"
#include "gbd/rbdogs.hpp"
#include "gbd/rng.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> downsample_trace(const std::vector<double>& trace,
                                     std::size_t cap = 1000) {
  if (trace.size() <= cap) {
    return trace;
  }
  const std::size_t stride = (trace.size() + cap - 1) / cap;
  std::vector<double> out;
  for (std::size_t i = 0; i < trace.size(); i += stride) {
    out.push_back(trace[i]);
  }
  if (out.back() != trace.back()) {
    out.push_back(trace.back());
  }
  return out;
}

json vector_to_json(const gbd::Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i));
  }
  return arr;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw gbd::InputError("cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw gbd::InputError("cannot open " + path + " for writing");
  }
  out << text;
  if (!out) {
    throw gbd::InputError("write to " + path + " failed");
  }
}

struct BoundScenario {
  Eigen::Index n = 20;
  double p_edge = 0.4;
  Eigen::Index p_samples = 60;
  double theta = 0.15;
  double alpha = 0.2;
  double target_delta = 0.5;
  std::uint64_t seed = 1;
  gbd::BoundParams params;
};

BoundScenario parse_bound_scenario(const std::string& text) {
  BoundScenario sc;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) {
      throw gbd::InputError("scenario must be a JSON object");
    }
    const std::vector<std::string> allowed = {
        "n",     "p_edge", "p_samples",  "theta",      "alpha",
        "target_delta", "seed", "c1",    "sigma_q",    "sigma1",
        "sigma2", "sigma3", "sigma4",    "delta_prob"};
    for (const auto& item : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), item.key()) ==
          allowed.end()) {
        throw gbd::InputError("unknown scenario key: " + item.key());
      }
    }
    if (j.contains("n")) sc.n = j.at("n").get<Eigen::Index>();
    if (j.contains("p_edge")) sc.p_edge = j.at("p_edge").get<double>();
    if (j.contains("p_samples"))
      sc.p_samples = j.at("p_samples").get<Eigen::Index>();
    if (j.contains("theta")) sc.theta = j.at("theta").get<double>();
    if (j.contains("alpha")) sc.alpha = j.at("alpha").get<double>();
    if (j.contains("target_delta"))
      sc.target_delta = j.at("target_delta").get<double>();
    if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
    sc.params = gbd::BoundParams::defaults_for_theta(sc.theta);
    if (j.contains("c1")) sc.params.c1 = j.at("c1").get<double>();
    if (j.contains("sigma_q"))
      sc.params.sigma_q = j.at("sigma_q").get<double>();
    if (j.contains("sigma1")) sc.params.sigma1 = j.at("sigma1").get<double>();
    if (j.contains("sigma2")) sc.params.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("sigma3")) sc.params.sigma3 = j.at("sigma3").get<double>();
    if (j.contains("sigma4")) sc.params.sigma4 = j.at("sigma4").get<double>();
    if (j.contains("delta_prob"))
      sc.params.delta_prob = j.at("delta_prob").get<double>();
  } catch (const json::exception& ex) {
    throw gbd::InputError(std::string("scenario parse error: ") + ex.what());
  }
  sc.params.validate();
  return sc;
}

int run_gen(Eigen::Index n, double p_edge, Eigen::Index p_samples,
            double theta, double alpha, double target_delta,
            std::uint64_t seed, const std::string& out_dir) {
  const gbd::ExperimentGraph eg =
      gbd::sample_experiment_graph(n, p_edge, gbd::derive_seed(seed, {0}));
  const gbd::InversePair pair =
      gbd::controlled_inverse_response(n, alpha, gbd::derive_seed(seed, {1}));
  const gbd::SparseSignal x0 = gbd::sample_bernoulli_gaussian(
      n, p_samples, theta, gbd::derive_seed(seed, {2}));
  const gbd::GraphFilter forward = gbd::filter_from_freq(eg.basis, pair.h0);
  const gbd::Matrix y = gbd::synthesize_observations(forward, x0);
  double xi = 0.0;
  gbd::Matrix v_p = eg.basis.vectors;
  if (target_delta > 0.0) {
    const gbd::Matrix w =
        gbd::random_unit_skew(n, gbd::derive_seed(seed, {3}));
    xi = gbd::xi_for_target_delta(w, target_delta, 1e-10);
    v_p = gbd::cayley_perturb(eg.basis.vectors, w, xi);
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream edges((dir / "graph.edges").string());
    gbd::save_edge_list(eg.graph, edges);
  }
  gbd::save_matrix_csv(eg.gso, (dir / "gso.csv").string());
  gbd::save_matrix_csv(eg.basis.vectors, (dir / "v.csv").string());
  gbd::save_matrix_csv(v_p, (dir / "vp.csv").string());
  gbd::save_matrix_csv(pair.g0, (dir / "g0.csv").string());
  gbd::save_matrix_csv(pair.h0, (dir / "h0.csv").string());
  gbd::save_matrix_csv(x0.x, (dir / "x0.csv").string());
  gbd::save_matrix_csv(x0.omega, (dir / "omega.csv").string());
  gbd::save_matrix_csv(y, (dir / "y.csv").string());

  json j;
  j["n"] = n;
  j["p_edge"] = p_edge;
  j["p_samples"] = p_samples;
  j["theta"] = theta;
  j["alpha"] = alpha;
  j["target_delta"] = target_delta;
  j["xi"] = xi;
  j["delta_f"] = (eg.basis.vectors - v_p).norm();
  j["seed"] = seed;
  write_text_file((dir / "instance.json").string(), j.dump(2) + "\n");
  std::cout << "instance written to " << out_dir << "\n";
  return 0;
}

int run_solve_bdog(const std::string& y_path, const std::string& v_path,
                   std::optional<double> epsilon, std::optional<double> tol,
                   const std::string& out_path) {
  const gbd::Matrix y = gbd::load_matrix_csv(y_path);
  const gbd::Matrix v = gbd::load_matrix_csv(v_path);
  gbd::BdogConfig cfg;
  cfg.epsilon = epsilon ? *epsilon : gbd::default_huber_epsilon(y);
  if (tol) {
    cfg.grad_tol = *tol;
  }
  const gbd::SolveReport rep = gbd::solve_bdog(y, v, cfg);
  json j;
  j["g_hat"] = vector_to_json(rep.g_hat);
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["objective_trace"] = downsample_trace(rep.objective_trace);
  j["wall_time_s"] = rep.wall_time_s;
  j["epsilon"] = cfg.epsilon;
  write_text_file(out_path, j.dump(2) + "\n");
  std::cout << "solution written to " << out_path << "\n";
  return 0;
}

int run_solve_rbdogs(const std::string& y_path, const std::string& vp_path,
                     std::optional<double> rho, std::optional<double> delta,
                     const std::string& out_path) {
  const gbd::Matrix y = gbd::load_matrix_csv(y_path);
  const gbd::Matrix v_p = gbd::load_matrix_csv(vp_path);
  gbd::RbdogsConfig cfg;
  cfg.epsilon = gbd::default_huber_epsilon(y);
  cfg.rho = rho ? *rho : gbd::default_proximity_weight(y);
  if (delta) {
    cfg.delta_stop = *delta;
  }
  const gbd::RbdogsReport rep = gbd::rbdogs(y, v_p, cfg);

  fs::path sidecar(out_path);
  sidecar.replace_extension(".vhat.csv");
  gbd::save_matrix_csv(rep.v_hat, sidecar.string());

  json j;
  j["g_hat"] = vector_to_json(rep.g_hat);
  j["v_hat_csv"] = sidecar.string();
  j["f_trace"] = downsample_trace(rep.full_objective_trace);
  j["outer_iterations"] = rep.outer_iterations;
  j["converged"] = rep.converged;
  j["wall_time_s"] = rep.wall_time_s;
  j["rho"] = cfg.rho;
  j["epsilon"] = cfg.epsilon;
  write_text_file(out_path, j.dump(2) + "\n");
  std::cout << "solution written to " << out_path << "\n";
  return 0;
}

int run_bounds(const BoundScenario& sc) {
  const gbd::ExperimentGraph eg =
      gbd::sample_experiment_graph(sc.n, sc.p_edge,
                                   gbd::derive_seed(sc.seed, {0}));
  const gbd::InversePair pair = gbd::controlled_inverse_response(
      sc.n, sc.alpha, gbd::derive_seed(sc.seed, {1}));
  const gbd::SparseSignal x0 = gbd::sample_bernoulli_gaussian(
      sc.n, sc.p_samples, sc.theta, gbd::derive_seed(sc.seed, {2}));

  const gbd::Matrix& v = eg.basis.vectors;
  const gbd::A0Result a0 = gbd::recovery_threshold_a0(v, sc.params);
  const gbd::RecoveryCheck rec =
      gbd::exact_recovery_check(pair.g0, v, sc.params);

  json j;
  j["a0"] = a0.value;
  j["bracket_nonpositive"] = a0.bracket_nonpositive;
  j["alpha"] = rec.lhs;
  j["recovery_holds"] = rec.holds;

  gbd::BoundParams worst = sc.params;
  worst.sigma_q.reset();
  const auto q_worst = gbd::q_factor(pair.g0, a0.value, worst);
  j["q_worst_case"] = q_worst ? json(*q_worst) : json();
  if (sc.params.sigma_q) {
    const auto q_at = gbd::q_factor(pair.g0, a0.value, sc.params);
    j["q_at_sigma"] = q_at ? json(*q_at) : json();
  }

  if (sc.target_delta > 0.0 && q_worst) {
    const gbd::Matrix w =
        gbd::random_unit_skew(sc.n, gbd::derive_seed(sc.seed, {3}));
    const double xi = gbd::xi_for_target_delta(w, sc.target_delta, 1e-10);
    const gbd::Matrix v_p = gbd::cayley_perturb(v, w, xi);
    const gbd::Matrix delta = v - v_p;
    j["xi"] = xi;
    j["delta_f"] = delta.norm();

    const gbd::Matrix e =
        gbd::error_matrix_e(v, v_p, pair.g0, pair.h0, x0.x);
    const gbd::Matrix e_comp = gbd::restrict_complement(e, x0.omega);
    j["e_comp_l11"] = gbd::norm_1_1(e_comp);
    const gbd::StabilityBound sb = gbd::stability_bound(
        pair.g0, e_comp, v, a0.value, *q_worst, sc.p_samples);
    j["eq4_numerator"] = sb.numerator;
    j["eq4_denominator"] = sb.denominator;
    j["eq4_bound"] = sb.bound ? json(*sb.bound) : json("infeasible");

    const gbd::Matrix delta_dir = delta / delta.norm();
    const gbd::TolerableDelta td = gbd::tolerable_delta_details(
        pair.g0, pair.h0, x0.x, v, delta_dir, a0.value, *q_worst,
        sc.p_samples);
    j["m1"] = td.m1;
    j["m2"] = td.m2;
    j["eq7_tolerable_delta"] = td.bound;

    j["identity_residual_at_g0"] = gbd::general_identity_residual(
        pair.g0, v, v_p, pair.g0, pair.h0, x0.x);
  }
  j["min_sample_size_cprime_1"] = gbd::min_sample_size(sc.params, 1.0);

  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_calibrate(const BoundScenario& sc, int n_train, int n_holdout,
                  double margin) {
  gbd::ExperimentConfig cfg;
  cfg.n = sc.n;
  cfg.p_edge = sc.p_edge;
  cfg.p_samples = sc.p_samples;
  cfg.theta = sc.theta;
  cfg.master_seed = sc.seed;
  const gbd::BoundCalibration cal = gbd::calibrate_stability_constant(
      cfg, sc.alpha, sc.target_delta, n_train, n_holdout, margin);
  json j;
  j["c1"] = cal.c1;
  j["min_critical_c1"] = cal.min_critical_c1;
  j["margin"] = cal.margin;
  j["train_total"] = cal.train_total;
  j["train_usable"] = cal.train_usable;
  j["holdout_total"] = cal.holdout_total;
  j["holdout_feasible"] = cal.holdout_feasible;
  j["holdout_held"] = cal.holdout_held;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_experiment(bool testcase1, const std::string& config_path,
                   std::optional<std::uint64_t> seed,
                   std::optional<int> workers, bool full, bool timing,
                   std::string out_dir) {
  gbd::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = gbd::parse_experiment_config(read_text_file(config_path));
  }
  if (seed) {
    cfg.master_seed = *seed;
  }
  if (workers) {
    cfg.workers = *workers;
  }
  if (full) {
    cfg.n_realizations = 100;
  }
  if (out_dir.empty()) {
    out_dir = testcase1 ? "out-tc1" : "out-tc2";
  }
  const std::vector<gbd::MetricRow> rows =
      testcase1 ? gbd::run_testcase1(cfg) : gbd::run_testcase2(cfg);
  const std::string prefix = testcase1 ? "tc1" : "tc2";
  gbd::write_testcase_artifacts(cfg, rows,
                                testcase1 ? "exp-tc1" : "exp-tc2", prefix,
                                out_dir);
  if (timing) {
    gbd::emit_csv(rows,
                  (fs::path(out_dir) / (prefix + "_raw_timed.csv")).string(),
                  true);
  }
  int failed = 0;
  for (const auto& row : rows) {
    if (row.status != "ok") {
      ++failed;
    }
  }
  std::cout << rows.size() << " rows written to " << out_dir;
  if (failed > 0) {
    std::cout << " (" << failed << " failed cells recorded)";
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blind deconvolution of graph signals under eigenbasis "
               "perturbations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out;
  int workers = 1;
  bool full = false;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output file or directory");
  app.add_option("--workers", workers, "worker threads for sweeps");
  app.add_flag("--full", full, "paper-scale realization count (100)");

  auto* gen = app.add_subcommand("gen", "generate a problem instance");
  Eigen::Index gen_n = 20;
  double gen_p_edge = 0.4;
  Eigen::Index gen_p = 60;
  double gen_theta = 0.15;
  double gen_alpha = 0.2;
  double gen_target_delta = 0.0;
  gen->add_option("--n", gen_n, "number of nodes");
  gen->add_option("--p-edge", gen_p_edge, "edge probability");
  gen->add_option("--p-samples", gen_p, "number of observed signals");
  gen->add_option("--theta", gen_theta, "Bernoulli support probability");
  gen->add_option("--alpha", gen_alpha, "target ||P_1perp g0||_2");
  gen->add_option("--target-delta", gen_target_delta,
                  "target ||V - V_p||_F (0 = unperturbed)");

  auto* solve_b = app.add_subcommand("solve-bdog",
                                     "convex solver on a fixed basis");
  std::string by_path;
  std::string bv_path;
  double b_epsilon = -1.0;
  double b_tol = -1.0;
  solve_b->add_option("--y", by_path, "observations CSV")->required();
  solve_b->add_option("--v", bv_path, "basis CSV")->required();
  solve_b->add_option("--epsilon", b_epsilon, "Huber knee (default: auto)");
  solve_b->add_option("--tol", b_tol, "gradient stopping tolerance");

  auto* solve_r = app.add_subcommand("solve-rbdogs",
                                     "alternating solver with basis updates");
  std::string ry_path;
  std::string rvp_path;
  double r_rho = -1.0;
  double r_delta = -1.0;
  solve_r->add_option("--y", ry_path, "observations CSV")->required();
  solve_r->add_option("--vp", rvp_path, "perturbed basis CSV")->required();
  solve_r->add_option("--rho", r_rho, "proximity weight (default: auto)");
  solve_r->add_option("--delta", r_delta, "joint stopping tolerance");

  auto* bounds_cmd = app.add_subcommand(
      "bounds", "evaluate recovery threshold and stability bounds");
  std::string scenario_path;
  bool calibrate = false;
  int n_train = 20;
  int n_holdout = 40;
  double margin = 0.5;
  bounds_cmd->add_option("--scenario", scenario_path, "scenario JSON")
      ->required();
  bounds_cmd->add_flag("--calibrate", calibrate,
                       "fit the bound constant c1 instead");
  bounds_cmd->add_option("--train", n_train, "calibration training seeds");
  bounds_cmd->add_option("--holdout", n_holdout, "calibration holdout seeds");
  bounds_cmd->add_option("--margin", margin, "calibration safety margin");

  auto* tc1 = app.add_subcommand("exp-tc1",
                                 "perturbation sweep with a known basis");
  auto* tc2 = app.add_subcommand("exp-tc2",
                                 "sample-size sweep with a covariance basis");
  std::string tc1_config;
  std::string tc2_config;
  bool tc1_timing = false;
  bool tc2_timing = false;
  tc1->add_option("--config", tc1_config, "experiment config JSON");
  tc1->add_flag("--timing", tc1_timing, "also write a wall-time CSV");
  tc2->add_option("--config", tc2_config, "experiment config JSON");
  tc2->add_flag("--timing", tc2_timing, "also write a wall-time CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return run_gen(gen_n, gen_p_edge, gen_p, gen_theta, gen_alpha,
                     gen_target_delta, seed, out.empty() ? "instance" : out);
    }
    if (solve_b->parsed()) {
      return run_solve_bdog(
          by_path, bv_path,
          b_epsilon > 0.0 ? std::optional<double>(b_epsilon) : std::nullopt,
          b_tol > 0.0 ? std::optional<double>(b_tol) : std::nullopt,
          out.empty() ? "bdog.json" : out);
    }
    if (solve_r->parsed()) {
      return run_solve_rbdogs(
          ry_path, rvp_path,
          r_rho > 0.0 ? std::optional<double>(r_rho) : std::nullopt,
          r_delta > 0.0 ? std::optional<double>(r_delta) : std::nullopt,
          out.empty() ? "rbdogs.json" : out);
    }
    if (bounds_cmd->parsed()) {
      const BoundScenario sc =
          parse_bound_scenario(read_text_file(scenario_path));
      return calibrate ? run_calibrate(sc, n_train, n_holdout, margin)
                       : run_bounds(sc);
    }
    if (tc1->parsed() || tc2->parsed()) {
      const bool is_tc1 = tc1->parsed();
      const auto seed_opt = app.count("--seed") > 0
                                ? std::optional<std::uint64_t>(seed)
                                : std::nullopt;
      const auto workers_opt =
          app.count("--workers") > 0 ? std::optional<int>(workers)
                                     : std::nullopt;
      return run_experiment(is_tc1, is_tc1 ? tc1_config : tc2_config,
                            seed_opt, workers_opt, full,
                            is_tc1 ? tc1_timing : tc2_timing, out);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
