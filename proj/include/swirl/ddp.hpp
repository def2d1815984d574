#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "swirl/cost.hpp"
#include "swirl/errors.hpp"
#include "swirl/integrate.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// GaussNewton drops the costate-contracted step Hessians from the Q
/// expansion (the usual iLQR simplification); FullDDP keeps them.
enum class HessianMode { GaussNewton, FullDDP };

struct DdpOptions {
  int max_iters = 500;
  double cost_tol = 1e-6;  // relative cost change / expected improvement
  double reg_init = 1e-6;
  double reg_min = 1e-9;
  double reg_max = 1e9;
  double reg_factor = 10.0;    // grow on a failed iteration
  double reg_decrease = 0.5;   // shrink after an accepted one
  double armijo_ratio = 1e-4;  // accepted decrease vs expected
  std::vector<double> stepsize_schedule = default_schedule();
  HessianMode hessian_mode = HessianMode::GaussNewton;

  static std::vector<double> default_schedule() {
    std::vector<double> s(11);
    double a = 1.0;
    for (auto& v : s) {
      v = a;
      a *= 0.5;
    }
    return s;
  }
};

/// Affine policy from one backward pass: du_t = stepsize * k_t + K_t dx_t.
/// d1/d2 are the accumulated linear/quadratic coefficients of the predicted
/// cost change.
struct FeedbackPolicy {
  std::vector<VectorXd> feedforward;
  std::vector<MatrixXd> gain;
  double d1 = 0.0;
  double d2 = 0.0;

  double expected_reduction(double stepsize) const {
    return -(stepsize * d1 + 0.5 * stepsize * stepsize * d2);
  }
};

enum class DdpTermination { Converged, MaxIters, Stalled };

struct DdpResult {
  std::vector<VectorXd> states;
  std::vector<VectorXd> controls;
  FeedbackPolicy policy;
  std::vector<double> cost_history;  // initial cost, then each accepted cost
  double total_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  DdpTermination termination = DdpTermination::MaxIters;
  double final_reg = 0.0;
};

inline std::vector<VectorXd> rollout(const DiscreteModel& model,
                                     const VectorXd& x0,
                                     const std::vector<VectorXd>& controls) {
  std::vector<VectorXd> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const VectorXd& u : controls) states.push_back(model.step(states.back(), u));
  return states;
}

inline double trajectory_cost(const CostModel& cost,
                              const std::vector<VectorXd>& states,
                              const std::vector<VectorXd>& controls) {
  double c = 0.0;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    c += cost.stage(states[t], controls[t]);
  }
  return c + cost.terminal(states.back());
}

/// Value recursion along the nominal trajectory at regularization `reg`.
/// Throws NotPositiveDefinite when the regularized Q_uu fails Cholesky; the
/// caller raises reg and retries.
inline FeedbackPolicy backward_pass(const DiscreteModel& model,
                                    const CostModel& cost,
                                    const std::vector<VectorXd>& states,
                                    const std::vector<VectorXd>& controls,
                                    double reg, HessianMode mode) {
  const int steps = static_cast<int>(controls.size());
  const int nc = model.control_dim();

  FeedbackPolicy policy;
  policy.feedforward.resize(steps);
  policy.gain.resize(steps);

  VectorXd vx;
  MatrixXd vxx;
  cost.terminal_expansion(states[steps], vx, vxx);

  StepDerivatives sd;
  VectorXd lx, lu;
  MatrixXd lxx, luu, lxu, cxx, cxu, cuu;
  const MatrixXd reg_eye = reg * MatrixXd::Identity(nc, nc);

  for (int t = steps - 1; t >= 0; --t) {
    model.step_derivatives(states[t], controls[t], sd, false);
    cost.stage_expansion(states[t], controls[t], lx, lxx, lu, luu, lxu);

    const VectorXd qx = lx + sd.fx.transpose() * vx;
    const VectorXd qu = lu + sd.fu.transpose() * vx;
    const MatrixXd fxt_vxx = sd.fx.transpose() * vxx;
    const MatrixXd fut_vxx = sd.fu.transpose() * vxx;
    MatrixXd qxx = lxx;
    qxx.noalias() += fxt_vxx * sd.fx;
    MatrixXd qux = lxu.transpose();
    qux.noalias() += fut_vxx * sd.fx;
    MatrixXd quu = luu;
    quu.noalias() += fut_vxx * sd.fu;

    if (mode == HessianMode::FullDDP) {
      model.contract_step_hessians(states[t], controls[t], vx, cxx, cxu, cuu);
      qxx += cxx;
      qux += cxu.transpose();
      quu += cuu;
    }
    qxx = 0.5 * (qxx + qxx.transpose()).eval();
    quu = 0.5 * (quu + quu.transpose()).eval();

    Eigen::LLT<MatrixXd> llt(quu + reg_eye);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("regularized Q_uu not positive definite at step " +
                                std::to_string(t));
    }
    const VectorXd k = -llt.solve(qu);
    const MatrixXd gain = -llt.solve(qux);

    policy.d1 += k.dot(qu);
    policy.d2 += k.dot(quu * k);

    const VectorXd quu_k = quu * k;
    vx = qx;
    vx.noalias() += gain.transpose() * quu_k;
    vx.noalias() += gain.transpose() * qu;
    vx.noalias() += qux.transpose() * k;
    vxx = qxx;
    vxx.noalias() += gain.transpose() * quu * gain;
    vxx.noalias() += gain.transpose() * qux;
    vxx.noalias() += qux.transpose() * gain;
    vxx = 0.5 * (vxx + vxx.transpose()).eval();

    policy.feedforward[t] = k;
    policy.gain[t] = gain;
  }
  return policy;
}

struct ForwardPassResult {
  bool accepted = false;
  std::vector<VectorXd> states;
  std::vector<VectorXd> controls;
  double total_cost = 0.0;
  double stepsize = 0.0;
};

/// Line-searched rollout of the policy around the nominal trajectory. The
/// feedback term is applied at full strength at every stepsize; only the
/// feedforward is scaled. A rollout that wanders into a singular kernel
/// evaluation just fails that stepsize.
inline ForwardPassResult forward_pass(const DiscreteModel& model,
                                      const CostModel& cost,
                                      const std::vector<VectorXd>& states,
                                      const std::vector<VectorXd>& controls,
                                      const FeedbackPolicy& policy,
                                      double current_cost,
                                      const DdpOptions& opts) {
  const int steps = static_cast<int>(controls.size());
  ForwardPassResult result;
  std::vector<VectorXd> new_states(steps + 1), new_controls(steps);

  for (double stepsize : opts.stepsize_schedule) {
    const double expected = policy.expected_reduction(stepsize);
    if (!(expected > 0.0)) continue;
    bool singular = false;
    new_states[0] = states[0];
    for (int t = 0; t < steps && !singular; ++t) {
      new_controls[t] = controls[t] + stepsize * policy.feedforward[t] +
                        policy.gain[t] * (new_states[t] - states[t]);
      try {
        new_states[t + 1] = model.step(new_states[t], new_controls[t]);
      } catch (const SingularEvaluation&) {
        singular = true;
      }
    }
    if (singular) continue;
    const double new_cost = trajectory_cost(cost, new_states, new_controls);
    if (std::isfinite(new_cost) &&
        current_cost - new_cost >= opts.armijo_ratio * expected) {
      result.accepted = true;
      result.states = new_states;
      result.controls = new_controls;
      result.total_cost = new_cost;
      result.stepsize = stepsize;
      return result;
    }
  }
  return result;
}

/// Full solve: alternate backward and forward passes with multiplicative
/// regularization adaptation until the relative cost improvement (realized,
/// or best predicted) drops below cost_tol.
inline DdpResult solve_ddp(const DiscreteModel& model, const CostModel& cost,
                           const VectorXd& x0,
                           const std::vector<VectorXd>& u_init,
                           const DdpOptions& opts = {}) {
  DdpResult result;
  result.controls = u_init;
  result.states = rollout(model, x0, result.controls);
  result.total_cost = trajectory_cost(cost, result.states, result.controls);
  result.cost_history.push_back(result.total_cost);

  double reg = opts.reg_init;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    result.iterations = iter;

    bool have_policy = false;
    while (!have_policy) {
      try {
        result.policy = backward_pass(model, cost, result.states, result.controls,
                                      reg, opts.hessian_mode);
        have_policy = true;
      } catch (const NotPositiveDefinite&) {
        if (reg >= opts.reg_max) {
          result.termination = DdpTermination::Stalled;
          result.final_reg = reg;
          return result;
        }
        reg = std::min(opts.reg_max, reg * opts.reg_factor);
      }
    }

    double best_expected = 0.0;
    for (double stepsize : opts.stepsize_schedule) {
      best_expected = std::max(best_expected, result.policy.expected_reduction(stepsize));
    }
    if (best_expected < opts.cost_tol * std::max(1.0, std::abs(result.total_cost))) {
      result.converged = true;
      result.termination = DdpTermination::Converged;
      result.final_reg = reg;
      return result;
    }

    const ForwardPassResult fwd = forward_pass(model, cost, result.states,
                                               result.controls, result.policy,
                                               result.total_cost, opts);
    if (fwd.accepted) {
      const double decrease = result.total_cost - fwd.total_cost;
      const double rel_change = decrease / std::max(std::abs(result.total_cost), 1e-300);
      result.states = fwd.states;
      result.controls = fwd.controls;
      result.total_cost = fwd.total_cost;
      result.cost_history.push_back(fwd.total_cost);
      reg = std::max(opts.reg_min, reg * opts.reg_decrease);
      if (rel_change < opts.cost_tol) {
        result.converged = true;
        result.termination = DdpTermination::Converged;
        result.final_reg = reg;
        return result;
      }
    } else {
      if (reg >= opts.reg_max) {
        result.termination = DdpTermination::Stalled;
        result.final_reg = reg;
        return result;
      }
      reg = std::min(opts.reg_max, reg * opts.reg_factor);
    }
  }
  result.termination = DdpTermination::MaxIters;
  result.final_reg = reg;
  return result;
}

}  // namespace swirl
