#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "swirl/cost.hpp"
#include "swirl/ddp.hpp"
#include "swirl/errors.hpp"
#include "swirl/gpc.hpp"
#include "swirl/gpc_dynamics.hpp"
#include "swirl/monte_carlo.hpp"
#include "swirl/rotlet.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// One transport problem: steer the particle distribution to the target
/// with rotors seeded on a ring around the target mean.
struct ScenarioConfig {
  ControlMode mode = ControlMode::VelocityControl;
  int n_rotors = 4;
  double t_f = 8.0;
  double dt = 0.01;
  Vec2 initial_mean{1.0, 1.0};
  double initial_cov_scale = 0.025;
  Vec2 target_mean{-1.0, -1.0};
  double target_var = 0.0;
  double rotor_ring_radius = 0.2;
  int gpc_degree = 3;
  int quad_points = 8;
  double eps = 0.0;
  double r_min = kDefaultRMin;
  double alpha = 1.0 / 3.0;  // torque-mode control weight scaling
  std::uint64_t seed = 1;
  int mc_samples = 10000;
  DdpOptions ddp;
  std::optional<CostWeights> weights_override;

  int horizon_steps() const {
    return static_cast<int>(std::llround(t_f / dt));
  }

  void validate() const {
    if (n_rotors < 1) throw ConfigError("n_rotors: must be >= 1");
    if (mode == ControlMode::TorqueOnly && n_rotors < 2) {
      throw ConfigError("n_rotors: torque mode needs at least two rotors to generate translational motion");
    }
    if (!(dt > 0.0)) throw ConfigError("dt: must be positive");
    if (!(t_f > 0.0)) throw ConfigError("t_f: must be positive");
    const double steps = t_f / dt;
    if (std::abs(steps - std::llround(steps)) > 1e-9 * std::max(1.0, steps)) {
      throw ConfigError("t_f: not an integral number of dt steps");
    }
    if (initial_cov_scale < 0.0) throw ConfigError("initial_cov_scale: must be >= 0");
    if (target_var < 0.0) throw ConfigError("target_var: must be >= 0");
    if (!(rotor_ring_radius > 0.0)) throw ConfigError("rotor_ring_radius: must be positive");
    if (gpc_degree < 1) throw ConfigError("gpc_degree: must be >= 1");
    if (quad_points < gpc_degree + 1) {
      throw ConfigError("quad_points: need at least gpc_degree + 1 points for an exact Gram matrix");
    }
    if (eps < 0.0) throw ConfigError("eps: must be >= 0");
    if (!(r_min > 0.0)) throw ConfigError("r_min: must be positive");
    if (alpha <= 0.0) throw ConfigError("alpha: must be positive");
    if (mc_samples < 1) throw ConfigError("mc_samples: must be >= 1");
  }

  /// Rotor k sits on the ring at angle 2 pi k / n_r, counterclockwise from
  /// the rotor directly right of the target.
  std::vector<Vec2> rotor_ring() const {
    std::vector<Vec2> ring(n_rotors);
    for (int k = 0; k < n_rotors; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / n_rotors;
      ring[k] = target_mean + rotor_ring_radius * Vec2(std::cos(angle), std::sin(angle));
    }
    return ring;
  }

  HermiteBasis basis() const { return HermiteBasis(2, gpc_degree); }

  GpcProjector projector() const {
    return GpcProjector(basis(), tensor_gauss_hermite(2, quad_points));
  }

  RotorSystem system() const { return RotorSystem(n_rotors, mode, eps, r_min); }

  GpcState initial_coeffs(const HermiteBasis& b) const {
    const auto ring = rotor_ring();
    VectorXd rotors(2 * n_rotors);
    for (int k = 0; k < n_rotors; ++k) {
      rotors[k] = ring[k].x();
      rotors[n_rotors + k] = ring[k].y();
    }
    const double sd = std::sqrt(initial_cov_scale);
    return project_gaussian_initial(initial_mean, Vec2(sd, sd), rotors, b);
  }

  CostWeights weights() const {
    if (weights_override) return *weights_override;
    return build_scenario_weights(mode, n_rotors, dt, alpha);
  }

  MomentTarget target() const {
    return {Eigen::Vector4d(target_mean.x(), target_mean.y(), target_var, target_var)};
  }
};

/// A solved scenario plus the value-type context needed to interrogate it
/// after the solver's borrowed models go out of scope.
struct SolvedScenario {
  ScenarioConfig config;
  HermiteBasis basis;
  DdpResult result;

  int n_states() const { return state_dim(config.n_rotors); }

  GpcState coeffs(int t) const { return unflatten(result.states[t], n_states()); }

  /// Zeroth-coefficient rotor block per time index, in the state layout
  /// [x_r*, y_r*], ready for ensemble advection.
  std::vector<VectorXd> rotor_states() const {
    std::vector<VectorXd> out;
    out.reserve(result.states.size());
    const int k1 = basis.size();
    for (const VectorXd& s : result.states) {
      VectorXd r(2 * config.n_rotors);
      for (int i = 0; i < 2 * config.n_rotors; ++i) r[i] = s[(2 + i) * k1];
      out.push_back(std::move(r));
    }
    return out;
  }

  /// Rotor configurations per step (positions at step start, strengths from
  /// that step's control), the playback format for tracer fields.
  std::vector<RotorConfig> rotor_history() const {
    std::vector<RotorConfig> configs;
    configs.reserve(result.controls.size());
    const int k1 = basis.size();
    const StateLayout lay{config.n_rotors};
    for (std::size_t t = 0; t < result.controls.size(); ++t) {
      RotorConfig cfg;
      cfg.positions.resize(config.n_rotors);
      for (int i = 0; i < config.n_rotors; ++i) {
        cfg.positions[i] = Vec2(result.states[t][lay.rotor_x_index(i) * k1],
                                result.states[t][lay.rotor_y_index(i) * k1]);
      }
      cfg.strengths = result.controls[t].head(config.n_rotors);
      configs.push_back(std::move(cfg));
    }
    return configs;
  }

  std::vector<Eigen::Vector4d> moment_history() const {
    std::vector<Eigen::Vector4d> out;
    out.reserve(result.states.size());
    for (std::size_t t = 0; t < result.states.size(); ++t) {
      out.push_back(moment_output(coeffs(static_cast<int>(t)), basis));
    }
    return out;
  }
};

/// Builds the full pipeline (rotor system, projection, discretization,
/// moment cost) and runs the optimizer from zero initial controls.
inline SolvedScenario solve_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const HermiteBasis basis = cfg.basis();
  const GpcProjector proj = cfg.projector();
  const RotorSystem system = cfg.system();
  const GpcSystem gpc_system(system, proj);
  const DiscretizedModel model(gpc_system, cfg.dt);
  const MomentCost cost(cfg.weights(), cfg.target(), basis, system.state_dim());

  const VectorXd x0 = flatten(cfg.initial_coeffs(basis));
  const std::vector<VectorXd> u_init(cfg.horizon_steps(),
                                     VectorXd::Zero(system.control_dim()));
  SolvedScenario solved{cfg, basis, solve_ddp(model, cost, x0, u_init, cfg.ddp)};
  return solved;
}

/// Open-loop propagation of a given control sequence from the scenario's
/// initial state.
inline SolvedScenario simulate_scenario(const ScenarioConfig& cfg,
                                        const std::vector<VectorXd>& controls) {
  cfg.validate();
  if (static_cast<int>(controls.size()) != cfg.horizon_steps()) {
    throw ConfigError("controls: expected " + std::to_string(cfg.horizon_steps()) +
                      " rows, got " + std::to_string(controls.size()));
  }
  const HermiteBasis basis = cfg.basis();
  const GpcProjector proj = cfg.projector();
  const RotorSystem system = cfg.system();
  const GpcSystem gpc_system(system, proj);
  const DiscretizedModel model(gpc_system, cfg.dt);
  const MomentCost cost(cfg.weights(), cfg.target(), basis, system.state_dim());

  SolvedScenario solved{cfg, basis, DdpResult{}};
  solved.result.controls = controls;
  solved.result.states = rollout(model, flatten(cfg.initial_coeffs(basis)), controls);
  solved.result.total_cost =
      trajectory_cost(cost, solved.result.states, solved.result.controls);
  solved.result.cost_history = {solved.result.total_cost};
  solved.result.converged = true;
  solved.result.termination = DdpTermination::Converged;
  return solved;
}

/// Monte Carlo validation of a solved scenario: sample, advect under the
/// stored rotor motion, and compare sample moments to the surrogate's.
struct ValidationReport {
  std::vector<SampleMoments> mc_moments;
  std::vector<Eigen::Vector4d> gpc_moments;
  double mc_cost = 0.0;
  double gpc_cost = 0.0;
  int flagged_particles = 0;
};

inline ValidationReport validate_scenario(const SolvedScenario& solved,
                                          int n_particles, std::uint64_t seed) {
  const ScenarioConfig& cfg = solved.config;
  const double sd = std::sqrt(cfg.initial_cov_scale);
  const ParticleEnsemble ens0 =
      sample_initial(cfg.initial_mean, Vec2(sd, sd), n_particles, seed);
  const std::vector<ParticleEnsemble> history =
      advect(ens0, solved.rotor_states(), solved.result.controls, cfg.dt,
             cfg.mode, cfg.eps, cfg.r_min);

  ValidationReport report;
  report.gpc_moments = solved.moment_history();
  report.mc_moments.reserve(history.size());
  for (const auto& e : history) report.mc_moments.push_back(sample_moments(e));
  report.mc_cost = true_cost(report.mc_moments, solved.result.controls,
                             cfg.weights(), cfg.target());
  report.gpc_cost = solved.result.total_cost;
  for (std::uint8_t f : history.back().flags) {
    if (f != 0) ++report.flagged_particles;
  }
  return report;
}

}  // namespace swirl
