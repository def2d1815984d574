// swirl: optimal rotor schedules for particle-distribution transport.
//
// Subcommands: optimize, simulate, sweep, validate, ftle. Every run writes
// its resolved config plus a manifest keyed by an FNV-1a hash of the
// canonical config dump, so artifacts can be reproduced bit for bit.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swirl/swirl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using swirl::ConfigError;
using swirl::ScenarioConfig;
using swirl::Vec2;
using swirl::VectorXd;

namespace {

// ---------------------------------------------------------------------------
// Config schema

const std::set<std::string>& top_level_keys() {
  static const std::set<std::string> keys = {
      "mode",           "n_rotors",   "t_f",
      "dt",             "initial_mean", "initial_cov_scale",
      "target_mean",    "target_var", "rotor_ring_radius",
      "gpc_degree",     "quad_points", "eps",
      "r_min",          "alpha",      "seed",
      "mc_samples",     "ddp",        "weights"};
  return keys;
}

const std::set<std::string>& ddp_keys() {
  static const std::set<std::string> keys = {
      "max_iters",  "cost_tol",     "reg_init",     "reg_min",     "reg_max",
      "reg_factor", "reg_decrease", "armijo_ratio", "hessian_mode"};
  return keys;
}

const std::set<std::string>& weight_keys() {
  static const std::set<std::string> keys = {"s", "s_h", "r", "alpha"};
  return keys;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix + "expected an object");
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError(prefix + item.key() + ": unknown key");
    }
  }
}

double num_at(const json& j, const char* key, double fallback,
              const std::string& prefix = "") {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(prefix + key + ": expected a number");
  return v.get<double>();
}

int int_at(const json& j, const char* key, int fallback,
           const std::string& prefix = "") {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(prefix + key + ": expected an integer");
  }
  return v.get<int>();
}

std::uint64_t seed_at(const json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

Vec2 vec2_at(const json& j, const char* key, const Vec2& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(std::string(key) + ": expected an array of two numbers");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

VectorXd vector_at(const json& j, const char* key, const std::string& prefix) {
  if (!j.contains(key)) throw ConfigError(prefix + key + ": required");
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) {
    throw ConfigError(prefix + key + ": expected a non-empty array of numbers");
  }
  VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError(prefix + key + ": expected numbers");
    }
    out[static_cast<int>(i)] = v[i].get<double>();
  }
  return out;
}

ScenarioConfig parse_config(const json& j) {
  reject_unknown_keys(j, top_level_keys(), "");
  ScenarioConfig cfg;

  if (j.contains("mode")) {
    const json& v = j.at("mode");
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "velocity") {
      cfg.mode = swirl::ControlMode::VelocityControl;
    } else if (s == "torque") {
      cfg.mode = swirl::ControlMode::TorqueOnly;
    } else {
      throw ConfigError("mode: expected \"velocity\" or \"torque\"");
    }
  }
  cfg.n_rotors = int_at(j, "n_rotors", cfg.n_rotors);
  cfg.t_f = num_at(j, "t_f", cfg.t_f);
  cfg.dt = num_at(j, "dt", cfg.dt);
  cfg.initial_mean = vec2_at(j, "initial_mean", cfg.initial_mean);
  cfg.initial_cov_scale = num_at(j, "initial_cov_scale", cfg.initial_cov_scale);
  cfg.target_mean = vec2_at(j, "target_mean", cfg.target_mean);
  cfg.target_var = num_at(j, "target_var", cfg.target_var);
  cfg.rotor_ring_radius = num_at(j, "rotor_ring_radius", cfg.rotor_ring_radius);
  cfg.gpc_degree = int_at(j, "gpc_degree", cfg.gpc_degree);
  cfg.quad_points = int_at(j, "quad_points", cfg.quad_points);
  cfg.eps = num_at(j, "eps", cfg.eps);
  cfg.r_min = num_at(j, "r_min", cfg.r_min);
  cfg.alpha = num_at(j, "alpha", cfg.alpha);
  cfg.seed = seed_at(j, "seed", cfg.seed);
  cfg.mc_samples = int_at(j, "mc_samples", cfg.mc_samples);

  if (j.contains("ddp")) {
    const json& d = j.at("ddp");
    reject_unknown_keys(d, ddp_keys(), "ddp.");
    cfg.ddp.max_iters = int_at(d, "max_iters", cfg.ddp.max_iters, "ddp.");
    cfg.ddp.cost_tol = num_at(d, "cost_tol", cfg.ddp.cost_tol, "ddp.");
    cfg.ddp.reg_init = num_at(d, "reg_init", cfg.ddp.reg_init, "ddp.");
    cfg.ddp.reg_min = num_at(d, "reg_min", cfg.ddp.reg_min, "ddp.");
    cfg.ddp.reg_max = num_at(d, "reg_max", cfg.ddp.reg_max, "ddp.");
    cfg.ddp.reg_factor = num_at(d, "reg_factor", cfg.ddp.reg_factor, "ddp.");
    cfg.ddp.reg_decrease = num_at(d, "reg_decrease", cfg.ddp.reg_decrease, "ddp.");
    cfg.ddp.armijo_ratio = num_at(d, "armijo_ratio", cfg.ddp.armijo_ratio, "ddp.");
    if (d.contains("hessian_mode")) {
      const json& v = d.at("hessian_mode");
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "gauss_newton") {
        cfg.ddp.hessian_mode = swirl::HessianMode::GaussNewton;
      } else if (s == "full") {
        cfg.ddp.hessian_mode = swirl::HessianMode::FullDDP;
      } else {
        throw ConfigError("ddp.hessian_mode: expected \"gauss_newton\" or \"full\"");
      }
    }
  }

  if (j.contains("weights") && !j.at("weights").is_null()) {
    const json& w = j.at("weights");
    reject_unknown_keys(w, weight_keys(), "weights.");
    swirl::CostWeights weights;
    weights.s = vector_at(w, "s", "weights.");
    weights.s_h = vector_at(w, "s_h", "weights.");
    weights.r = vector_at(w, "r", "weights.");
    weights.alpha = num_at(w, "alpha", 1.0, "weights.");
    if (weights.s.size() != 4 || weights.s_h.size() != 4) {
      throw ConfigError("weights.s: moment weights need exactly 4 entries");
    }
    if (weights.r.size() != control_dim(cfg.mode, cfg.n_rotors)) {
      throw ConfigError("weights.r: expected " +
                        std::to_string(control_dim(cfg.mode, cfg.n_rotors)) +
                        " entries for this mode and rotor count");
    }
    cfg.weights_override = weights;
  }

  cfg.validate();
  return cfg;
}

json canonical_json(const ScenarioConfig& cfg) {
  json j;
  j["mode"] = cfg.mode == swirl::ControlMode::VelocityControl ? "velocity" : "torque";
  j["n_rotors"] = cfg.n_rotors;
  j["t_f"] = cfg.t_f;
  j["dt"] = cfg.dt;
  j["initial_mean"] = {cfg.initial_mean.x(), cfg.initial_mean.y()};
  j["initial_cov_scale"] = cfg.initial_cov_scale;
  j["target_mean"] = {cfg.target_mean.x(), cfg.target_mean.y()};
  j["target_var"] = cfg.target_var;
  j["rotor_ring_radius"] = cfg.rotor_ring_radius;
  j["gpc_degree"] = cfg.gpc_degree;
  j["quad_points"] = cfg.quad_points;
  j["eps"] = cfg.eps;
  j["r_min"] = cfg.r_min;
  j["alpha"] = cfg.alpha;
  j["seed"] = cfg.seed;
  j["mc_samples"] = cfg.mc_samples;
  j["ddp"] = {
      {"max_iters", cfg.ddp.max_iters},
      {"cost_tol", cfg.ddp.cost_tol},
      {"reg_init", cfg.ddp.reg_init},
      {"reg_min", cfg.ddp.reg_min},
      {"reg_max", cfg.ddp.reg_max},
      {"reg_factor", cfg.ddp.reg_factor},
      {"reg_decrease", cfg.ddp.reg_decrease},
      {"armijo_ratio", cfg.ddp.armijo_ratio},
      {"hessian_mode", cfg.ddp.hessian_mode == swirl::HessianMode::GaussNewton
                           ? "gauss_newton"
                           : "full"},
  };
  if (cfg.weights_override) {
    const swirl::CostWeights& w = *cfg.weights_override;
    auto to_array = [](const VectorXd& v) {
      return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["weights"] = {{"s", to_array(w.s)},
                    {"s_h", to_array(w.s_h)},
                    {"r", to_array(w.r)},
                    {"alpha", w.alpha}};
  } else {
    j["weights"] = nullptr;
  }
  return j;
}

std::string hash_hex(const json& canonical) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(swirl::fnv1a64(canonical.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// CLI flag overrides (take precedence over the config file)

struct Overrides {
  std::optional<std::string> mode;
  std::optional<int> n_rotors;
  std::optional<double> t_f;
  std::optional<double> dt;
  std::optional<std::vector<double>> initial_mean;
  std::optional<double> initial_cov_scale;
  std::optional<std::vector<double>> target_mean;
  std::optional<double> target_var;
  std::optional<double> rotor_ring_radius;
  std::optional<int> gpc_degree;
  std::optional<int> quad_points;
  std::optional<double> eps;
  std::optional<double> r_min;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<int> mc_samples;
  std::optional<int> max_iters;
  std::optional<double> cost_tol;
  std::optional<std::string> hessian_mode;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "velocity | torque");
    cmd->add_option("--n-rotors", n_rotors, "number of rotors");
    cmd->add_option("--t-f", t_f, "final time");
    cmd->add_option("--dt", dt, "integration step");
    cmd->add_option("--initial-mean", initial_mean, "initial mean (two values)")
        ->expected(2);
    cmd->add_option("--initial-cov-scale", initial_cov_scale,
                    "initial isotropic covariance");
    cmd->add_option("--target-mean", target_mean, "target mean (two values)")
        ->expected(2);
    cmd->add_option("--target-var", target_var, "target per-axis variance");
    cmd->add_option("--rotor-ring-radius", rotor_ring_radius,
                    "rotor seeding ring radius");
    cmd->add_option("--gpc-degree", gpc_degree, "chaos expansion degree");
    cmd->add_option("--quad-points", quad_points, "quadrature points per axis");
    cmd->add_option("--eps", eps, "kernel blob radius");
    cmd->add_option("--r-min", r_min, "near-field guard radius");
    cmd->add_option("--alpha", alpha, "torque-mode control weight scale");
    cmd->add_option("--seed", seed, "sampling seed");
    cmd->add_option("--mc-samples", mc_samples, "validation ensemble size");
    cmd->add_option("--max-iters", max_iters, "optimizer iteration cap");
    cmd->add_option("--cost-tol", cost_tol, "optimizer relative cost tolerance");
    cmd->add_option("--hessian-mode", hessian_mode, "gauss_newton | full");
  }

  void apply(json& j) const {
    if (mode) j["mode"] = *mode;
    if (n_rotors) j["n_rotors"] = *n_rotors;
    if (t_f) j["t_f"] = *t_f;
    if (dt) j["dt"] = *dt;
    if (initial_mean) j["initial_mean"] = *initial_mean;
    if (initial_cov_scale) j["initial_cov_scale"] = *initial_cov_scale;
    if (target_mean) j["target_mean"] = *target_mean;
    if (target_var) j["target_var"] = *target_var;
    if (rotor_ring_radius) j["rotor_ring_radius"] = *rotor_ring_radius;
    if (gpc_degree) j["gpc_degree"] = *gpc_degree;
    if (quad_points) j["quad_points"] = *quad_points;
    if (eps) j["eps"] = *eps;
    if (r_min) j["r_min"] = *r_min;
    if (alpha) j["alpha"] = *alpha;
    if (seed) j["seed"] = *seed;
    if (mc_samples) j["mc_samples"] = *mc_samples;
    if (max_iters) j["ddp"]["max_iters"] = *max_iters;
    if (cost_tol) j["ddp"]["cost_tol"] = *cost_tol;
    if (hessian_mode) j["ddp"]["hessian_mode"] = *hessian_mode;
  }
};

json load_config(const std::string& path, const Overrides& over) {
  json j = json::object();
  if (!path.empty()) {
    const std::string text = swirl::read_text_file(path);
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  over.apply(j);
  return j;
}

// ---------------------------------------------------------------------------
// Artifact writers

std::vector<std::string> trajectory_columns(const ScenarioConfig& cfg,
                                            int basis_size) {
  std::vector<std::string> cols = {"t"};
  const int n_states = swirl::state_dim(cfg.n_rotors);
  for (int i = 0; i < n_states; ++i) {
    for (int k = 0; k < basis_size; ++k) {
      cols.push_back("x" + std::to_string(i) + "_" + std::to_string(k));
    }
  }
  return cols;
}

std::vector<std::string> control_columns(const ScenarioConfig& cfg) {
  std::vector<std::string> cols = {"t"};
  for (int i = 0; i < cfg.n_rotors; ++i) cols.push_back("gamma" + std::to_string(i));
  if (cfg.mode == swirl::ControlMode::VelocityControl) {
    for (int i = 0; i < cfg.n_rotors; ++i) cols.push_back("vx" + std::to_string(i));
    for (int i = 0; i < cfg.n_rotors; ++i) cols.push_back("vy" + std::to_string(i));
  }
  return cols;
}

std::string termination_name(swirl::DdpTermination t) {
  switch (t) {
    case swirl::DdpTermination::Converged: return "converged";
    case swirl::DdpTermination::MaxIters: return "max_iters";
    case swirl::DdpTermination::Stalled: return "stalled";
  }
  return "unknown";
}

void write_json_file(const fs::path& path, const json& j) {
  swirl::write_text_file(path.string(), j.dump(2) + "\n");
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::string& config_hash, std::uint64_t seed,
                    std::vector<std::string> artifacts,
                    const std::string& name = "manifest.json") {
  std::sort(artifacts.begin(), artifacts.end());
  json m;
  m["command"] = command;
  m["config_hash"] = config_hash;
  m["seed"] = seed;
  m["artifacts"] = artifacts;
  write_json_file(dir / name, m);
}

void write_run_artifacts(const fs::path& dir, const swirl::SolvedScenario& solved,
                         const json& canonical, const std::string& command) {
  const ScenarioConfig& cfg = solved.config;
  fs::create_directories(dir);
  write_json_file(dir / "config.json", canonical);

  swirl::write_text_file(
      (dir / "trajectory.csv").string(),
      swirl::format_timeseries_csv(trajectory_columns(cfg, solved.basis.size()),
                                   solved.result.states, cfg.dt));
  swirl::write_text_file(
      (dir / "controls.csv").string(),
      swirl::format_timeseries_csv(control_columns(cfg), solved.result.controls,
                                   cfg.dt));
  swirl::write_text_file(
      (dir / "moments.csv").string(),
      swirl::format_moments_csv(solved.moment_history(), "gpc", cfg.dt));

  json conv;
  conv["converged"] = solved.result.converged;
  conv["iterations"] = solved.result.iterations;
  conv["termination"] = termination_name(solved.result.termination);
  conv["final_reg"] = solved.result.final_reg;
  conv["cost_history"] = solved.result.cost_history;
  write_json_file(dir / "convergence.json", conv);

  const auto moments = solved.moment_history();
  json summary;
  summary["total_cost"] = solved.result.total_cost;
  summary["terminal_mean"] = {moments.back()[0], moments.back()[1]};
  summary["terminal_var"] = {moments.back()[2], moments.back()[3]};
  summary["config_hash"] = hash_hex(canonical);
  write_json_file(dir / "cost_summary.json", summary);

  write_manifest(dir, command, hash_hex(canonical), cfg.seed,
                 {"config.json", "trajectory.csv", "controls.csv", "moments.csv",
                  "convergence.json", "cost_summary.json"});
}

// ---------------------------------------------------------------------------
// Run loading (validate / ftle re-derive states from stored controls)

swirl::SolvedScenario load_run(const fs::path& run_dir) {
  const fs::path cfg_path = run_dir / "config.json";
  const fs::path controls_path = run_dir / "controls.csv";
  json j;
  try {
    j = json::parse(swirl::read_text_file(cfg_path.string()));
  } catch (const json::exception& e) {
    throw swirl::MissingArtifact(cfg_path.string() + ": " + e.what());
  }
  const ScenarioConfig cfg = parse_config(j);
  const std::vector<VectorXd> controls =
      swirl::parse_timeseries_csv(swirl::read_text_file(controls_path.string()));
  return swirl::simulate_scenario(cfg, controls);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_optimize(const json& raw, const fs::path& out) {
  const ScenarioConfig cfg = parse_config(raw);
  const swirl::SolvedScenario solved = swirl::solve_scenario(cfg);
  write_run_artifacts(out, solved, canonical_json(cfg), "optimize");
  if (!solved.result.converged) {
    std::cerr << "optimize: did not converge ("
              << termination_name(solved.result.termination) << " after "
              << solved.result.iterations << " iterations)\n";
    return 3;
  }
  return 0;
}

int cmd_simulate(const json& raw, const std::string& controls_path,
                 const fs::path& out) {
  const ScenarioConfig cfg = parse_config(raw);
  const std::vector<VectorXd> controls =
      swirl::parse_timeseries_csv(swirl::read_text_file(controls_path));
  const swirl::SolvedScenario sim = swirl::simulate_scenario(cfg, controls);
  write_run_artifacts(out, sim, canonical_json(cfg), "simulate");
  return 0;
}

int cmd_validate(const fs::path& run_dir, const fs::path& out,
                 std::optional<int> samples, std::optional<std::uint64_t> seed) {
  const swirl::SolvedScenario solved = load_run(run_dir);
  const int n = samples.value_or(solved.config.mc_samples);
  const std::uint64_t s = seed.value_or(solved.config.seed);
  if (n < 1) throw ConfigError("samples: must be >= 1");
  const swirl::ValidationReport report = swirl::validate_scenario(solved, n, s);

  fs::create_directories(out);
  std::string csv =
      swirl::format_moments_csv(report.gpc_moments, "gpc", solved.config.dt);
  std::vector<Eigen::Vector4d> mc_rows;
  mc_rows.reserve(report.mc_moments.size());
  for (const auto& m : report.mc_moments) {
    mc_rows.emplace_back(m.mean.x(), m.mean.y(), m.cov(0, 0), m.cov(1, 1));
  }
  csv += swirl::format_moments_csv(mc_rows, "mc", solved.config.dt, false);
  swirl::write_text_file((out / "validate_moments.csv").string(), csv);

  const json canonical = canonical_json(solved.config);
  json t;
  t["mc_cost"] = report.mc_cost;
  t["gpc_cost"] = report.gpc_cost;
  t["samples"] = n;
  t["seed"] = s;
  t["flagged_particles"] = report.flagged_particles;
  t["config_hash"] = hash_hex(canonical);
  write_json_file(out / "true_cost.json", t);

  write_manifest(out, "validate", hash_hex(canonical), s,
                 {"validate_moments.csv", "true_cost.json"},
                 "validate_manifest.json");
  return 0;
}

int cmd_ftle(const fs::path& run_dir, const fs::path& out, double t0, double tau,
             int resolution, const std::vector<double>& domain, int density_bins) {
  if (tau == 0.0) throw ConfigError("tau: must be nonzero");
  if (resolution < 3) throw ConfigError("resolution: must be >= 3");
  if (density_bins < 1) throw ConfigError("density_bins: must be >= 1");

  const swirl::SolvedScenario solved = load_run(run_dir);
  const ScenarioConfig& cfg = solved.config;
  const int k0 = static_cast<int>(std::llround(t0 / cfg.dt));
  const int m = static_cast<int>(std::llround(std::abs(tau) / cfg.dt));
  if (m < 1) throw ConfigError("tau: window shorter than one step");

  swirl::FtleGridSpec grid;
  grid.lo = Vec2(domain[0], domain[0]);
  grid.hi = Vec2(domain[1], domain[1]);
  grid.nx = resolution;
  grid.ny = resolution;
  grid.validate();

  const swirl::RotorHistoryField field(solved.rotor_history(), cfg.eps, cfg.r_min);
  const swirl::FtleAnalysis analysis =
      swirl::analyze_history(field, k0, m, grid, cfg.dt);

  fs::create_directories(out);
  swirl::write_text_file((out / "ftle_forward.csv").string(),
                         swirl::format_ftle_csv(analysis.forward));
  swirl::write_text_file((out / "ftle_backward.csv").string(),
                         swirl::format_ftle_csv(analysis.backward));
  swirl::write_ftle_binary((out / "ftle_forward.swft").string(), analysis.forward);
  swirl::write_ftle_binary((out / "ftle_backward.swft").string(), analysis.backward);

  // Particle density at the analysis start time, for ridge/density overlays.
  const double sd = std::sqrt(cfg.initial_cov_scale);
  const swirl::ParticleEnsemble ens0 =
      swirl::sample_initial(cfg.initial_mean, Vec2(sd, sd), cfg.mc_samples, cfg.seed);
  const auto rotor_states = solved.rotor_states();
  const std::vector<VectorXd> controls_to_t0(solved.result.controls.begin(),
                                             solved.result.controls.begin() + k0);
  const std::vector<VectorXd> rotors_to_t0(rotor_states.begin(),
                                           rotor_states.begin() + k0 + 1);
  const std::vector<swirl::ParticleEnsemble> history = swirl::advect(
      ens0, rotors_to_t0, controls_to_t0, cfg.dt, cfg.mode, cfg.eps, cfg.r_min);
  const swirl::DensityHistogram density = swirl::density_histogram(
      history.back().points, grid.lo, grid.hi, density_bins, density_bins);
  swirl::write_text_file((out / "density.csv").string(),
                         swirl::format_density_csv(density));

  const json canonical = canonical_json(cfg);
  json p;
  p["t0"] = t0;
  p["tau"] = tau;
  p["resolution"] = resolution;
  p["domain"] = domain;
  p["density_bins"] = density_bins;
  p["config_hash"] = hash_hex(canonical);
  write_json_file(out / "ftle_params.json", p);

  write_manifest(out, "ftle", hash_hex(canonical), cfg.seed,
                 {"ftle_forward.csv", "ftle_backward.csv", "ftle_forward.swft",
                  "ftle_backward.swft", "density.csv", "ftle_params.json"},
                 "ftle_manifest.json");
  return 0;
}

struct SweepCell {
  int n_rotors = 0;
  double t_f = 0.0;
  std::string dir;
  bool converged = false;
  double gpc_cost = std::numeric_limits<double>::quiet_NaN();
  double mc_cost = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

int cmd_sweep(const json& raw, const fs::path& out, std::vector<int> rotors,
              std::vector<double> finals, int workers) {
  if (rotors.empty()) throw ConfigError("rotors: list must be non-empty");
  if (finals.empty()) throw ConfigError("finals: list must be non-empty");
  if (workers < 1) throw ConfigError("workers: must be >= 1");

  // The base config must itself be valid before cells specialize it.
  const ScenarioConfig base = parse_config(raw);

  std::vector<SweepCell> cells;
  for (double tf : finals) {
    for (int nr : rotors) {
      SweepCell c;
      c.n_rotors = nr;
      c.t_f = tf;
      c.dir = "cell_nr" + std::to_string(nr) + "_tf" + swirl::fmt_g17(tf);
      cells.push_back(c);
    }
  }

  fs::create_directories(out);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepCell& cell = cells[i];
      try {
        json cell_raw = raw;
        cell_raw["n_rotors"] = cell.n_rotors;
        cell_raw["t_f"] = cell.t_f;
        const ScenarioConfig cfg = parse_config(cell_raw);
        const swirl::SolvedScenario solved = swirl::solve_scenario(cfg);
        write_run_artifacts(out / cell.dir, solved, canonical_json(cfg), "optimize");
        const swirl::ValidationReport report =
            swirl::validate_scenario(solved, cfg.mc_samples, cfg.seed);
        cell.converged = solved.result.converged;
        cell.gpc_cost = report.gpc_cost;
        cell.mc_cost = report.mc_cost;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(workers, static_cast<int>(cells.size()));
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // True-cost table, one row per final time, one column per rotor count.
  std::string table = "t_f";
  for (int nr : rotors) table += ",nr_" + std::to_string(nr);
  table += "\n";
  std::size_t idx = 0;
  for (double tf : finals) {
    table += swirl::fmt_g17(tf);
    for (std::size_t j = 0; j < rotors.size(); ++j) {
      table += "," + swirl::fmt_g17(cells[idx++].mc_cost);
    }
    table += "\n";
  }
  swirl::write_text_file((out / "sweep_costs.csv").string(), table);

  json summary = json::array();
  for (const SweepCell& c : cells) {
    json item;
    item["n_rotors"] = c.n_rotors;
    item["t_f"] = c.t_f;
    item["dir"] = c.dir;
    item["converged"] = c.converged;
    item["gpc_cost"] = c.gpc_cost;
    item["mc_cost"] = c.mc_cost;
    if (!c.error.empty()) item["error"] = c.error;
    summary.push_back(item);
  }
  write_json_file(out / "sweep_summary.json", summary);

  std::vector<std::string> artifacts = {"sweep_costs.csv", "sweep_summary.json"};
  for (const SweepCell& c : cells) artifacts.push_back(c.dir + "/");
  write_manifest(out, "sweep", hash_hex(canonical_json(base)), base.seed,
                 artifacts);
  return 0;
}

template <typename F>
int run_guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const swirl::WindowOutOfRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const swirl::DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const swirl::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotor-driven transport of a particle distribution: optimize "
               "torque/velocity schedules, validate them by Monte Carlo, and "
               "analyze the resulting flow structure"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string run_dir;
  std::string controls_path;
  Overrides over;

  auto* optimize = app.add_subcommand("optimize", "solve one transport scenario");
  optimize->add_option("--config", config_path, "JSON scenario config");
  optimize->add_option("--out", out_dir, "output directory")->required();
  over.add_flags(optimize);

  auto* simulate =
      app.add_subcommand("simulate", "open-loop rollout of a stored control file");
  simulate->add_option("--config", config_path, "JSON scenario config");
  simulate->add_option("--controls", controls_path, "controls CSV (t,u...)")
      ->required();
  simulate->add_option("--out", out_dir, "output directory")->required();
  over.add_flags(simulate);

  std::vector<int> sweep_rotors;
  std::vector<double> sweep_finals;
  int sweep_workers = 1;
  auto* sweep =
      app.add_subcommand("sweep", "optimize + validate a rotor-count x final-time grid");
  sweep->add_option("--config", config_path, "JSON scenario config");
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_option("--rotors", sweep_rotors, "rotor counts")
      ->required()
      ->delimiter(',');
  sweep->add_option("--finals", sweep_finals, "final times")
      ->required()
      ->delimiter(',');
  sweep->add_option("--workers", sweep_workers, "concurrent cells");
  over.add_flags(sweep);

  std::optional<int> val_samples;
  std::optional<std::uint64_t> val_seed;
  std::string val_out;
  auto* validate =
      app.add_subcommand("validate", "Monte Carlo check of a solved run");
  validate->add_option("--run", run_dir, "directory of a solved run")->required();
  validate->add_option("--out", val_out, "output directory (default: the run)");
  validate->add_option("--samples", val_samples, "ensemble size");
  validate->add_option("--seed", val_seed, "sampling seed");

  double ftle_t0 = 1.5;
  double ftle_tau = 1.5;
  int ftle_resolution = 250;
  std::vector<double> ftle_domain = {-2.0, 2.0};
  int ftle_density_bins = 50;
  std::string ftle_out;
  auto* ftle = app.add_subcommand(
      "ftle", "forward/backward stretching fields of a solved run's flow");
  ftle->add_option("--run", run_dir, "directory of a solved run")->required();
  ftle->add_option("--out", ftle_out, "output directory (default: the run)");
  ftle->add_option("--t0", ftle_t0, "analysis start time");
  ftle->add_option("--tau", ftle_tau, "integration span (sign picks nothing; "
                                      "both directions are computed)");
  ftle->add_option("--resolution", ftle_resolution, "grid nodes per axis");
  ftle->add_option("--domain", ftle_domain, "square domain lo hi")->expected(2);
  ftle->add_option("--density-bins", ftle_density_bins,
                   "density histogram bins per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return run_guarded([&]() -> int {
    if (optimize->parsed()) {
      return cmd_optimize(load_config(config_path, over), out_dir);
    }
    if (simulate->parsed()) {
      return cmd_simulate(load_config(config_path, over), controls_path, out_dir);
    }
    if (sweep->parsed()) {
      return cmd_sweep(load_config(config_path, over), out_dir, sweep_rotors,
                       sweep_finals, sweep_workers);
    }
    if (validate->parsed()) {
      return cmd_validate(run_dir, val_out.empty() ? run_dir : val_out,
                          val_samples, val_seed);
    }
    if (ftle->parsed()) {
      return cmd_ftle(run_dir, ftle_out.empty() ? run_dir : ftle_out, ftle_t0,
                      ftle_tau, ftle_resolution, ftle_domain, ftle_density_bins);
    }
    return 2;
  });
}
