#pragma once

#include <utility>
#include <vector>

#include "swirl/gpc.hpp"
#include "swirl/physical_model.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// The Galerkin-projected coefficient dynamics as a control system over the
/// flattened coefficient vector (row-major: entry i*K1+j is coefficient j of
/// physical coordinate i). Derivatives are quadrature evaluations of the
/// projected inner products, assembled from the underlying model's analytic
/// derivatives at the reconstructed node states.
class GpcSystem : public PhysicalModel {
 public:
  GpcSystem(const PhysicalModel& inner, const GpcProjector& proj)
      : inner_(inner), proj_(proj), n_(inner.state_dim()),
        k1_(proj.n_basis()) {}

  int state_dim() const override { return n_ * k1_; }
  int control_dim() const override { return inner_.control_dim(); }
  int inner_state_dim() const { return n_; }
  const GpcProjector& projector() const { return proj_; }
  const PhysicalModel& inner() const { return inner_; }

  VectorXd rhs(const VectorXd& x, const VectorXd& u) const override {
    return flatten(galerkin_rhs(unflatten(x, n_), u, inner_, proj_));
  }

  /// Jacobian block (i, a) over basis indices (j, b) is
  ///   sum_q w_q (df_i/dx_a)(x_q) phi_b(z_q) phi_j(z_q) / <phi_j^2>,
  /// a rank-1 update per node; the control Jacobian projects df_i/du_g onto
  /// each basis row. Materialized Hessian slices follow the same pattern one
  /// derivative order up; they are quadratic-size per output, so production
  /// solver paths use contract_hessians below instead.
  void derivatives(const VectorXd& x, const VectorXd& u, DerivativeBundle& out,
                   bool with_hessians) const override {
    const int nc = control_dim();
    out.resize(n_ * k1_, nc, with_hessians);
    const GpcState coeffs = unflatten(x, n_);
    const MatrixXd nodes = proj_.states_at_nodes(coeffs);

    DerivativeBundle nb;
    for (int q = 0; q < proj_.n_nodes(); ++q) {
      inner_.derivatives(nodes.col(q), u, nb, with_hessians);
      const auto pw = proj_.phi_w().row(q);
      const auto p = proj_.phi().row(q);
      const MatrixXd outer = pw.transpose() * p;

      for (int i = 0; i < n_; ++i) {
        for (int a = 0; a < n_; ++a) {
          const double j = nb.jac_state(i, a);
          if (j != 0.0) {
            out.jac_state.block(i * k1_, a * k1_, k1_, k1_).noalias() += j * outer;
          }
        }
        out.jac_control.block(i * k1_, 0, k1_, nc).noalias() +=
            pw.transpose() * nb.jac_control.row(i);
      }

      if (with_hessians) {
        const MatrixXd pp = p.transpose() * p;
        for (int i = 0; i < n_; ++i) {
          for (int j = 0; j < k1_; ++j) {
            const double wj = pw[j];
            const int l = i * k1_ + j;
            MatrixXd& hxx = out.hess_state_state[l];
            MatrixXd& hxu = out.hess_state_control[l];
            for (int a = 0; a < n_; ++a) {
              for (int c = 0; c < n_; ++c) {
                const double h = nb.hess_state_state[i](a, c);
                if (h != 0.0) {
                  hxx.block(a * k1_, c * k1_, k1_, k1_).noalias() += wj * h * pp;
                }
              }
              for (int g = 0; g < nc; ++g) {
                const double h = nb.hess_state_control[i](a, g);
                if (h != 0.0) {
                  hxu.block(a * k1_, g, k1_, 1).noalias() += wj * h * p.transpose();
                }
              }
            }
            out.hess_control_control[l].noalias() += wj * nb.hess_control_control[i];
          }
        }
      }
    }
  }

  /// Costate contraction without materializing per-output slices: for each
  /// node, fold v into s_q(i) = sum_j v[(i,j)] phi_j(z_q)/<phi_j^2>, contract
  /// the inner Hessians against s_q, and accumulate the basis outer products.
  void contract_hessians(const VectorXd& x, const VectorXd& u, const VectorXd& v,
                         MatrixXd& xx, MatrixXd& xu,
                         MatrixXd& uu) const override {
    const int nc = control_dim();
    xx.setZero(n_ * k1_, n_ * k1_);
    xu.setZero(n_ * k1_, nc);
    uu.setZero(nc, nc);

    const GpcState coeffs = unflatten(x, n_);
    const GpcState vmat = unflatten(v, n_);
    const MatrixXd nodes = proj_.states_at_nodes(coeffs);
    const MatrixXd s_all = vmat * proj_.phi_over_norm().transpose();

    DerivativeBundle nb;
    MatrixXd hxx_c(n_, n_), hxu_c(n_, nc), huu_c(nc, nc);
    for (int q = 0; q < proj_.n_nodes(); ++q) {
      inner_.derivatives(nodes.col(q), u, nb, true);
      const VectorXd s = s_all.col(q);
      hxx_c.setZero();
      hxu_c.setZero();
      huu_c.setZero();
      for (int i = 0; i < n_; ++i) {
        if (s[i] == 0.0) continue;
        hxx_c.noalias() += s[i] * nb.hess_state_state[i];
        hxu_c.noalias() += s[i] * nb.hess_state_control[i];
        huu_c.noalias() += s[i] * nb.hess_control_control[i];
      }

      const double w = proj_.quad().weights[q];
      const auto p = proj_.phi().row(q);
      const MatrixXd pp = p.transpose() * p;
      for (int a = 0; a < n_; ++a) {
        for (int c = 0; c < n_; ++c) {
          const double h = hxx_c(a, c);
          if (h != 0.0) {
            xx.block(a * k1_, c * k1_, k1_, k1_).noalias() += w * h * pp;
          }
        }
        for (int g = 0; g < nc; ++g) {
          const double h = hxu_c(a, g);
          if (h != 0.0) {
            xu.block(a * k1_, g, k1_, 1).noalias() += w * h * p.transpose();
          }
        }
      }
      uu.noalias() += w * huu_c;
    }
  }

 private:
  const PhysicalModel& inner_;
  const GpcProjector& proj_;
  int n_;
  int k1_;
};

/// The projected Jacobians as standalone matrices.
struct GpcJacobian {
  MatrixXd state;    // (n K1) x (n K1)
  MatrixXd control;  // (n K1) x n_c
};

inline GpcJacobian gpc_jacobian(const GpcState& coeffs, const VectorXd& u,
                                const PhysicalModel& inner,
                                const GpcProjector& proj) {
  GpcSystem sys(inner, proj);
  DerivativeBundle b;
  sys.derivatives(flatten(coeffs), u, b, false);
  return {std::move(b.jac_state), std::move(b.jac_control)};
}

/// Materialized second-derivative tensors, one slice per flattened output.
struct GpcHessians {
  std::vector<MatrixXd> state_state;
  std::vector<MatrixXd> state_control;
  std::vector<MatrixXd> control_control;
};

inline GpcHessians gpc_hessians(const GpcState& coeffs, const VectorXd& u,
                                const PhysicalModel& inner,
                                const GpcProjector& proj) {
  GpcSystem sys(inner, proj);
  DerivativeBundle b;
  sys.derivatives(flatten(coeffs), u, b, true);
  return {std::move(b.hess_state_state), std::move(b.hess_state_control),
          std::move(b.hess_control_control)};
}

}  // namespace swirl
