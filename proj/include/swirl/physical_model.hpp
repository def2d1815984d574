#pragma once

#include <vector>

#include "swirl/types.hpp"

namespace swirl {

/// First and second derivatives of a vector field f(x, u).
/// Hessian slices are indexed by output component i:
///   hess_state_state[i](a, c)   = d2 f_i / dx_a dx_c
///   hess_state_control[i](a, g) = d2 f_i / dx_a du_g
///   hess_control_control[i]     = d2 f_i / du du  (zero for all rotor systems)
struct DerivativeBundle {
  MatrixXd jac_state;
  MatrixXd jac_control;
  std::vector<MatrixXd> hess_state_state;
  std::vector<MatrixXd> hess_state_control;
  std::vector<MatrixXd> hess_control_control;

  void resize(int n, int nc, bool with_hessians) {
    jac_state.setZero(n, n);
    jac_control.setZero(n, nc);
    if (with_hessians) {
      hess_state_state.assign(n, MatrixXd::Zero(n, n));
      hess_state_control.assign(n, MatrixXd::Zero(n, nc));
      hess_control_control.assign(n, MatrixXd::Zero(nc, nc));
    } else {
      hess_state_state.clear();
      hess_state_control.clear();
      hess_control_control.clear();
    }
  }
};

/// Continuous-time control system dx/dt = f(x, u) with analytic derivatives.
/// Implementations must be pure: no mutable state, safe to call concurrently.
class PhysicalModel {
 public:
  virtual ~PhysicalModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  virtual VectorXd rhs(const VectorXd& x, const VectorXd& u) const = 0;

  /// Fills `out` with analytic derivatives at (x, u), resizing and zeroing it
  /// first. Hessian slices are only populated when `with_hessians` is set.
  virtual void derivatives(const VectorXd& x, const VectorXd& u,
                           DerivativeBundle& out, bool with_hessians) const = 0;

  /// Second derivatives contracted against a costate:
  ///   xx(a, c) = sum_i v_i d2 f_i / dx_a dx_c, and likewise xu, uu.
  /// The default materializes every slice; models whose Hessians have
  /// cheaper structure override this.
  virtual void contract_hessians(const VectorXd& x, const VectorXd& u,
                                 const VectorXd& v, MatrixXd& xx, MatrixXd& xu,
                                 MatrixXd& uu) const {
    DerivativeBundle b;
    derivatives(x, u, b, true);
    const int n = state_dim();
    const int nc = control_dim();
    xx.setZero(n, n);
    xu.setZero(n, nc);
    uu.setZero(nc, nc);
    for (int i = 0; i < n; ++i) {
      xx.noalias() += v[i] * b.hess_state_state[i];
      xu.noalias() += v[i] * b.hess_state_control[i];
      uu.noalias() += v[i] * b.hess_control_control[i];
    }
  }
};

}  // namespace swirl
