#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swirl/errors.hpp"
#include "swirl/hermite.hpp"
#include "swirl/physical_model.hpp"
#include "swirl/quadrature.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Coefficient matrix of a polynomial-chaos expansion: row i holds the
/// coefficients of physical coordinate i over the basis, column 0 is the
/// constant term.
using GpcState = MatrixXd;

struct MomentVector {
  VectorXd mean;
  MatrixXd cov;
};

/// Precomputed basis evaluations at the quadrature nodes. phi(q, j) is
/// phi_j(z_q); phi_w additionally carries the quadrature weight and the
/// 1/<phi_j^2> normalization, so a Galerkin projection of nodewise samples
/// f_q is just F_nodes * phi_w.
class GpcProjector {
 public:
  GpcProjector(HermiteBasis basis, QuadratureRule quad)
      : basis_(std::move(basis)), quad_(std::move(quad)) {
    if (basis_.dim() != quad_.dim) {
      throw DimensionMismatch("basis dim " + std::to_string(basis_.dim()) +
                              " vs quadrature dim " + std::to_string(quad_.dim));
    }
    const int m = quad_.size();
    const int k1 = basis_.size();
    phi_.resize(m, k1);
    for (int q = 0; q < m; ++q) {
      phi_.row(q) = basis_.eval_all(quad_.node(q)).transpose();
    }
    phi_over_norm_ = phi_ * basis_.norms().cwiseInverse().asDiagonal();
    phi_w_ = quad_.weights.asDiagonal() * phi_over_norm_;
  }

  const HermiteBasis& basis() const { return basis_; }
  const QuadratureRule& quad() const { return quad_; }
  int n_nodes() const { return quad_.size(); }
  int n_basis() const { return basis_.size(); }

  const MatrixXd& phi() const { return phi_; }
  const MatrixXd& phi_over_norm() const { return phi_over_norm_; }
  const MatrixXd& phi_w() const { return phi_w_; }

  /// Physical states reconstructed at every node, one per column.
  MatrixXd states_at_nodes(const GpcState& coeffs) const {
    return coeffs * phi_.transpose();
  }

 private:
  HermiteBasis basis_;
  QuadratureRule quad_;
  MatrixXd phi_;
  MatrixXd phi_over_norm_;
  MatrixXd phi_w_;
};

/// Expansion of a state whose first basis.dim() coordinates are independent
/// Gaussians x_i = mean_i + stdev_i Z_i and whose remaining coordinates are
/// the given deterministic values. The representation is exact: coordinate i
/// uses the constant term and its own degree-1 basis function only.
inline GpcState project_gaussian_initial(const VectorXd& mean,
                                         const VectorXd& stdev,
                                         const VectorXd& deterministic_states,
                                         const HermiteBasis& basis) {
  const int d = basis.dim();
  if (mean.size() != d || stdev.size() != d) {
    throw DimensionMismatch("gaussian projection needs one mean/stdev per stochastic coordinate");
  }
  const int n = d + static_cast<int>(deterministic_states.size());
  GpcState coeffs = GpcState::Zero(n, basis.size());
  for (int i = 0; i < d; ++i) {
    coeffs(i, 0) = mean[i];
    coeffs(i, basis.first_order_index(i)) = stdev[i];
  }
  for (int k = 0; k < deterministic_states.size(); ++k) {
    coeffs(d + k, 0) = deterministic_states[k];
  }
  return coeffs;
}

/// Galerkin-projected coefficient dynamics: evaluate the physical rhs at the
/// reconstructed node states and project back onto the basis.
inline GpcState galerkin_rhs(const GpcState& coeffs, const VectorXd& u,
                             const PhysicalModel& model,
                             const GpcProjector& proj) {
  const int m = proj.n_nodes();
  const MatrixXd nodes = proj.states_at_nodes(coeffs);
  MatrixXd f_nodes(model.state_dim(), m);
  for (int q = 0; q < m; ++q) {
    f_nodes.col(q) = model.rhs(nodes.col(q), u);
  }
  return f_nodes * proj.phi_w();
}

/// RK4 rollout of the coefficient dynamics; returns all controls.size()+1
/// states including the initial one.
inline std::vector<GpcState> propagate(const GpcState& initial,
                                       const std::vector<VectorXd>& controls,
                                       double dt, const PhysicalModel& model,
                                       const GpcProjector& proj) {
  std::vector<GpcState> states;
  states.reserve(controls.size() + 1);
  states.push_back(initial);
  for (std::size_t t = 0; t < controls.size(); ++t) {
    const GpcState& x = states.back();
    const VectorXd& u = controls[t];
    try {
      const GpcState k1 = galerkin_rhs(x, u, model, proj);
      const GpcState k2 = galerkin_rhs(x + 0.5 * dt * k1, u, model, proj);
      const GpcState k3 = galerkin_rhs(x + 0.5 * dt * k2, u, model, proj);
      const GpcState k4 = galerkin_rhs(x + dt * k3, u, model, proj);
      states.push_back(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    } catch (const SingularEvaluation& e) {
      throw SingularEvaluation("step " + std::to_string(t) + ": " + e.what());
    }
  }
  return states;
}

/// First and second central moments of the represented state.
inline MomentVector moments(const GpcState& coeffs, const HermiteBasis& basis) {
  const int n = static_cast<int>(coeffs.rows());
  MomentVector out;
  out.mean = coeffs.col(0);
  out.cov = MatrixXd::Zero(n, n);
  for (int k = 1; k < basis.size(); ++k) {
    out.cov.noalias() += basis.norm(k) * coeffs.col(k) * coeffs.col(k).transpose();
  }
  return out;
}

/// Row-major flattening: coefficient (i, j) lives at i * n_basis + j.
inline VectorXd flatten(const GpcState& coeffs) {
  VectorXd v(coeffs.size());
  const int k1 = static_cast<int>(coeffs.cols());
  for (int i = 0; i < coeffs.rows(); ++i) {
    v.segment(i * k1, k1) = coeffs.row(i).transpose();
  }
  return v;
}

inline GpcState unflatten(const VectorXd& v, int n_states) {
  if (n_states < 1 || v.size() % n_states != 0) {
    throw DimensionMismatch("flattened size " + std::to_string(v.size()) +
                            " not divisible by " + std::to_string(n_states) + " states");
  }
  const int k1 = static_cast<int>(v.size()) / n_states;
  GpcState coeffs(n_states, k1);
  for (int i = 0; i < n_states; ++i) {
    coeffs.row(i) = v.segment(i * k1, k1).transpose();
  }
  return coeffs;
}

}  // namespace swirl
