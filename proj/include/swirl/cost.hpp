#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "swirl/errors.hpp"
#include "swirl/gpc.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Diagonal weights of the moment-tracking cost, stored as the diagonals.
/// All entries carry the dt premultiplication.
struct CostWeights {
  VectorXd s;    // in-horizon moment error, length 4
  VectorXd s_h;  // terminal moment error, length 4
  VectorXd r;    // control effort, length = control dim
  double alpha = 1.0;

  static CostWeights from_matrices(const MatrixXd& s_mat, const MatrixXd& sh_mat,
                                   const MatrixXd& r_mat) {
    auto diag_of = [](const MatrixXd& m, const char* name) {
      if (m.rows() != m.cols() ||
          (m - MatrixXd(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() != 0.0) {
        throw NonDiagonalWeight(std::string(name) + " must be diagonal");
      }
      return VectorXd(m.diagonal());
    };
    CostWeights w;
    w.s = diag_of(s_mat, "S");
    w.s_h = diag_of(sh_mat, "S_H");
    w.r = diag_of(r_mat, "R");
    return w;
  }
};

struct MomentTarget {
  Eigen::Vector4d y_ref;
};

/// Preset weights for the two experiment families. Velocity mode penalizes
/// strengths at weight 1 and rotor velocities at 0.1; torque mode scales the
/// strength penalty by alpha^2.
inline CostWeights build_scenario_weights(ControlMode mode, int n_rotors,
                                          double dt, double alpha = 1.0 / 3.0) {
  CostWeights w;
  w.s = 0.1 * dt * VectorXd::Ones(4);
  w.alpha = alpha;
  if (mode == ControlMode::VelocityControl) {
    w.s_h = 1000.0 * dt * VectorXd::Ones(4);
    w.r.resize(3 * n_rotors);
    w.r.head(n_rotors).setConstant(dt);
    w.r.tail(2 * n_rotors).setConstant(0.1 * dt);
  } else {
    w.s_h = 500.0 * dt * VectorXd::Ones(4);
    w.r = alpha * alpha * dt * VectorXd::Ones(n_rotors);
  }
  return w;
}

/// Tracked outputs [mu_1, mu_2, sigma_11, sigma_22] of the particle
/// coordinates (state rows 0 and 1).
inline Eigen::Vector4d moment_output(const GpcState& coeffs,
                                     const HermiteBasis& basis) {
  Eigen::Vector4d y;
  y[0] = coeffs(0, 0);
  y[1] = coeffs(1, 0);
  y[2] = 0.0;
  y[3] = 0.0;
  for (int k = 1; k < basis.size(); ++k) {
    y[2] += basis.norm(k) * coeffs(0, k) * coeffs(0, k);
    y[3] += basis.norm(k) * coeffs(1, k) * coeffs(1, k);
  }
  return y;
}

inline double stage_cost(const GpcState& coeffs, const VectorXd& u,
                         const CostWeights& w, const MomentTarget& target,
                         const HermiteBasis& basis) {
  const Eigen::Vector4d e = moment_output(coeffs, basis) - target.y_ref;
  return e.dot(w.s.asDiagonal() * e) + u.dot(w.r.asDiagonal() * u);
}

inline double terminal_cost(const GpcState& coeffs, const CostWeights& w,
                            const MomentTarget& target,
                            const HermiteBasis& basis) {
  const Eigen::Vector4d e = moment_output(coeffs, basis) - target.y_ref;
  return e.dot(w.s_h.asDiagonal() * e);
}

/// Stage and terminal cost interface consumed by the trajectory optimizer;
/// states are flattened coefficient vectors.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual double stage(const VectorXd& x, const VectorXd& u) const = 0;
  virtual double terminal(const VectorXd& x) const = 0;
  /// Exact first and second derivatives of stage(x, u).
  virtual void stage_expansion(const VectorXd& x, const VectorXd& u,
                               VectorXd& lx, MatrixXd& lxx, VectorXd& lu,
                               MatrixXd& luu, MatrixXd& lxu) const = 0;
  virtual void terminal_expansion(const VectorXd& x, VectorXd& lx,
                                  MatrixXd& lxx) const = 0;
};

/// Moment-tracking quadratic cost over flattened gPC coefficients:
/// (M(X)-y_ref)' S (M(X)-y_ref) + u' R u, with M the four tracked moments.
/// The moment map is quadratic in the coefficients, so the expansion below
/// is exact, not a Gauss-Newton approximation.
class MomentCost : public CostModel {
 public:
  MomentCost(CostWeights weights, MomentTarget target, const HermiteBasis& basis,
             int n_states)
      : w_(std::move(weights)), target_(target), norms_(basis.norms()),
        n_states_(n_states), k1_(basis.size()) {}

  double stage(const VectorXd& x, const VectorXd& u) const override {
    const Eigen::Vector4d e = output_flat(x) - target_.y_ref;
    return e.dot(w_.s.asDiagonal() * e) + u.dot(w_.r.asDiagonal() * u);
  }

  double terminal(const VectorXd& x) const override {
    const Eigen::Vector4d e = output_flat(x) - target_.y_ref;
    return e.dot(w_.s_h.asDiagonal() * e);
  }

  void stage_expansion(const VectorXd& x, const VectorXd& u, VectorXd& lx,
                       MatrixXd& lxx, VectorXd& lu, MatrixXd& luu,
                       MatrixXd& lxu) const override {
    moment_expansion(x, w_.s, lx, lxx);
    lu = 2.0 * w_.r.asDiagonal() * u;
    luu = MatrixXd(2.0 * w_.r.asDiagonal());
    lxu = MatrixXd::Zero(x.size(), u.size());
  }

  void terminal_expansion(const VectorXd& x, VectorXd& lx,
                          MatrixXd& lxx) const override {
    moment_expansion(x, w_.s_h, lx, lxx);
  }

  const CostWeights& weights() const { return w_; }
  const MomentTarget& target() const { return target_; }

 private:
  Eigen::Vector4d output_flat(const VectorXd& x) const {
    if (n_states_ * k1_ != x.size()) {
      throw DimensionMismatch("flattened state size " + std::to_string(x.size()) +
                              ", expected " + std::to_string(n_states_ * k1_));
    }
    Eigen::Vector4d y;
    y[0] = x[0];
    y[1] = x[k1_];
    y[2] = 0.0;
    y[3] = 0.0;
    for (int k = 1; k < k1_; ++k) {
      y[2] += norms_[k] * x[k] * x[k];
      y[3] += norms_[k] * x[k1_ + k] * x[k1_ + k];
    }
    return y;
  }

  // d l / dx and d2 l / dx2 of e' diag(s) e with e = M(x) - y_ref. Only the
  // particle coefficient entries (the first 2 k1 components) participate.
  void moment_expansion(const VectorXd& x, const VectorXd& s, VectorXd& lx,
                        MatrixXd& lxx) const {
    if (n_states_ * k1_ != x.size()) {
      throw DimensionMismatch("flattened state size " + std::to_string(x.size()) +
                              ", expected " + std::to_string(n_states_ * k1_));
    }
    const Eigen::Vector4d e = output_flat(x) - target_.y_ref;
    lx = VectorXd::Zero(x.size());
    lxx = MatrixXd::Zero(x.size(), x.size());

    for (int i = 0; i < 2; ++i) {
      const int mean_m = i;
      const int var_m = 2 + i;
      const int base = i * k1_;
      lx[base] += 2.0 * s[mean_m] * e[mean_m];
      lxx(base, base) += 2.0 * s[mean_m];
      for (int k = 1; k < k1_; ++k) {
        const double g = 2.0 * x[base + k] * norms_[k];
        lx[base + k] += 2.0 * s[var_m] * e[var_m] * g;
        lxx(base + k, base + k) += 2.0 * s[var_m] * e[var_m] * 2.0 * norms_[k];
        for (int k2 = 1; k2 < k1_; ++k2) {
          const double g2 = 2.0 * x[base + k2] * norms_[k2];
          lxx(base + k, base + k2) += 2.0 * s[var_m] * g * g2;
        }
      }
    }
  }

  CostWeights w_;
  MomentTarget target_;
  VectorXd norms_;
  int n_states_;
  int k1_;
};

}  // namespace swirl
