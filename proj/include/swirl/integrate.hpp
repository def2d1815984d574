#pragma once

#include <utility>
#include <vector>

#include "swirl/physical_model.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// One classical RK4 step of dx/dt = f(x).
template <class F>
VectorXd rk4_step(F&& f, const VectorXd& x, double dt) {
  const VectorXd k1 = f(x);
  const VectorXd k2 = f(x + 0.5 * dt * k1);
  const VectorXd k3 = f(x + 0.5 * dt * k2);
  const VectorXd k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 step of a controlled system with the control held over the step.
inline VectorXd rk4_step(const PhysicalModel& model, const VectorXd& x,
                         const VectorXd& u, double dt) {
  return rk4_step([&](const VectorXd& s) { return model.rhs(s, u); }, x, dt);
}

/// Derivatives of a discrete step x' = F(x, u). Second-order slices follow
/// the DerivativeBundle convention (indexed by output component).
struct StepDerivatives {
  MatrixXd fx;
  MatrixXd fu;
  std::vector<MatrixXd> fxx;
  std::vector<MatrixXd> fxu;
  std::vector<MatrixXd> fuu;
};

/// Discrete-time system interface consumed by the trajectory optimizer.
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual VectorXd step(const VectorXd& x, const VectorXd& u) const = 0;
  virtual void step_derivatives(const VectorXd& x, const VectorXd& u,
                                StepDerivatives& out,
                                bool with_second_order) const = 0;

  /// Step-map second derivatives contracted against a costate, mirroring
  /// PhysicalModel::contract_hessians.
  virtual void contract_step_hessians(const VectorXd& x, const VectorXd& u,
                                      const VectorXd& v, MatrixXd& xx,
                                      MatrixXd& xu, MatrixXd& uu) const {
    StepDerivatives sd;
    step_derivatives(x, u, sd, true);
    const int n = state_dim();
    const int nc = control_dim();
    xx.setZero(n, n);
    xu.setZero(n, nc);
    uu.setZero(nc, nc);
    for (int i = 0; i < n; ++i) {
      xx.noalias() += v[i] * sd.fxx[i];
      xu.noalias() += v[i] * sd.fxu[i];
      uu.noalias() += v[i] * sd.fuu[i];
    }
  }
};

/// Fixed-step RK4 discretization of a continuous model.
///
/// First derivatives chain exactly through the four stages. Second-order
/// tensors, when requested, use the one-step Euler form F ≈ x + dt f, whose
/// Hessian is dt times the continuous one; the O(dt²) stage coupling is
/// dropped there but not in fx/fu.
class DiscretizedModel : public DiscreteModel {
 public:
  DiscretizedModel(const PhysicalModel& model, double dt)
      : model_(model), dt_(dt) {}

  int state_dim() const override { return model_.state_dim(); }
  int control_dim() const override { return model_.control_dim(); }
  double dt() const { return dt_; }
  const PhysicalModel& continuous() const { return model_; }

  VectorXd step(const VectorXd& x, const VectorXd& u) const override {
    return rk4_step(model_, x, u, dt_);
  }

  void step_derivatives(const VectorXd& x, const VectorXd& u,
                        StepDerivatives& out,
                        bool with_second_order) const override {
    const int n = model_.state_dim();
    const double h = dt_;

    DerivativeBundle d1, d2, d3, d4;
    const VectorXd k1 = model_.rhs(x, u);
    model_.derivatives(x, u, d1, with_second_order);
    const VectorXd x2 = x + 0.5 * h * k1;
    const VectorXd k2 = model_.rhs(x2, u);
    model_.derivatives(x2, u, d2, false);
    const VectorXd x3 = x + 0.5 * h * k2;
    const VectorXd k3 = model_.rhs(x3, u);
    model_.derivatives(x3, u, d3, false);
    const VectorXd x4 = x + h * k3;
    model_.derivatives(x4, u, d4, false);

    const MatrixXd eye = MatrixXd::Identity(n, n);
    const MatrixXd dk1 = d1.jac_state;
    const MatrixXd dk2 = d2.jac_state * (eye + 0.5 * h * dk1);
    const MatrixXd dk3 = d3.jac_state * (eye + 0.5 * h * dk2);
    const MatrixXd dk4 = d4.jac_state * (eye + h * dk3);
    out.fx = eye + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);

    const MatrixXd e1 = d1.jac_control;
    const MatrixXd e2 = d2.jac_control + d2.jac_state * (0.5 * h * e1);
    const MatrixXd e3 = d3.jac_control + d3.jac_state * (0.5 * h * e2);
    const MatrixXd e4 = d4.jac_control + d4.jac_state * (h * e3);
    out.fu = (h / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);

    if (with_second_order) {
      out.fxx.resize(n);
      out.fxu.resize(n);
      out.fuu.resize(n);
      for (int i = 0; i < n; ++i) {
        out.fxx[i] = h * d1.hess_state_state[i];
        out.fxu[i] = h * d1.hess_state_control[i];
        out.fuu[i] = h * d1.hess_control_control[i];
      }
    } else {
      out.fxx.clear();
      out.fxu.clear();
      out.fuu.clear();
    }
  }

  void contract_step_hessians(const VectorXd& x, const VectorXd& u,
                              const VectorXd& v, MatrixXd& xx, MatrixXd& xu,
                              MatrixXd& uu) const override {
    model_.contract_hessians(x, u, v, xx, xu, uu);
    xx *= dt_;
    xu *= dt_;
    uu *= dt_;
  }

 private:
  const PhysicalModel& model_;
  double dt_;
};

}  // namespace swirl
