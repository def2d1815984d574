#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "swirl/errors.hpp"
#include "swirl/physical_model.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// A group of point rotors: positions and signed strengths.
struct RotorConfig {
  std::vector<Vec2> positions;
  VectorXd strengths;

  int size() const { return static_cast<int>(positions.size()); }
};

/// Named access into the flat state layout [x_p, y_p, x_r*, y_r*].
struct StateLayout {
  int n_rotors = 0;

  int dim() const { return 2 * (n_rotors + 1); }
  static Vec2 particle(const VectorXd& s) { return {s[0], s[1]}; }
  Vec2 rotor(const VectorXd& s, int i) const { return {s[2 + i], s[2 + n_rotors + i]}; }
  int rotor_x_index(int i) const { return 2 + i; }
  int rotor_y_index(int i) const { return 2 + n_rotors + i; }

  void set_particle(VectorXd& s, const Vec2& p) const { s[0] = p.x(); s[1] = p.y(); }
  void set_rotor(VectorXd& s, int i, const Vec2& p) const {
    s[2 + i] = p.x();
    s[2 + n_rotors + i] = p.y();
  }

  RotorConfig rotors(const VectorXd& s, const VectorXd& strengths) const {
    RotorConfig cfg;
    cfg.positions.reserve(n_rotors);
    for (int i = 0; i < n_rotors; ++i) cfg.positions.push_back(rotor(s, i));
    cfg.strengths = strengths;
    return cfg;
  }
};

namespace detail {

// k-cross embedding: khat x (a, b) = (-b, a).
inline Vec2 kcross(const Vec2& v) { return {-v.y(), v.x()}; }

/// Unit-strength kernel g(d) = (khat x d) / (|d|^2 + eps^2); a rotor of
/// strength g contributes -g * g(d) with d = x - x_rotor.
inline Vec2 rotlet_kernel(const Vec2& d, double eps2) {
  const double rho = d.squaredNorm() + eps2;
  return kcross(d) / rho;
}

/// dg_i/dd_j.
inline Eigen::Matrix2d rotlet_kernel_grad(const Vec2& d, double eps2) {
  const double rho = d.squaredNorm() + eps2;
  const Vec2 kd = kcross(d);
  Eigen::Matrix2d grad;
  grad << 0.0, -1.0, 1.0, 0.0;  // d(kcross d)/dd
  grad /= rho;
  grad.noalias() -= (2.0 / (rho * rho)) * kd * d.transpose();
  return grad;
}

/// d2 g_i / dd_j dd_k, returned as one symmetric 2x2 slice per component i.
inline std::array<Eigen::Matrix2d, 2> rotlet_kernel_hess(const Vec2& d, double eps2) {
  const double rho = d.squaredNorm() + eps2;
  const double inv2 = 1.0 / (rho * rho);
  const double inv3 = inv2 / rho;
  const Vec2 kd = kcross(d);
  Eigen::Matrix2d jperp;
  jperp << 0.0, -1.0, 1.0, 0.0;

  std::array<Eigen::Matrix2d, 2> hess;
  for (int i = 0; i < 2; ++i) {
    Eigen::Matrix2d h;
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        double v = -2.0 * (jperp(i, j) * d[k] + jperp(i, k) * d[j] +
                           kd[i] * (j == k ? 1.0 : 0.0)) * inv2;
        v += 8.0 * kd[i] * d[j] * d[k] * inv3;
        h(j, k) = v;
      }
    }
    hess[i] = h;
  }
  return hess;
}

inline void check_separation(const Vec2& d, double eps, double r_min,
                             const char* what) {
  if (eps == 0.0 && d.squaredNorm() < r_min * r_min) {
    throw SingularEvaluation(std::string(what) + ": evaluation within r_min=" +
                             std::to_string(r_min) + " of a rotor (eps = 0)");
  }
}

}  // namespace detail

/// Velocity at `eval_point` induced by a single rotor. With eps = 0 this is
/// the unregularized rotlet; eps > 0 selects the blob kernel r^2 -> r^2+eps^2.
inline Vec2 rotlet_velocity(const Vec2& eval_point, const Vec2& rotor_pos,
                            double strength, double eps = 0.0,
                            double r_min = kDefaultRMin) {
  const Vec2 d = eval_point - rotor_pos;
  detail::check_separation(d, eps, r_min, "rotlet_velocity");
  return -strength * detail::rotlet_kernel(d, eps * eps);
}

/// Superposition of the individual rotor fields.
inline Vec2 superposed_velocity(const Vec2& eval_point, const RotorConfig& rotors,
                                double eps = 0.0, double r_min = kDefaultRMin) {
  Vec2 u = Vec2::Zero();
  for (int i = 0; i < rotors.size(); ++i) {
    u += rotlet_velocity(eval_point, rotors.positions[i], rotors.strengths[i], eps, r_min);
  }
  return u;
}

/// Guarded variant for tracer/particle advection: an evaluation inside r_min
/// of a rotor is computed with eps clamped to r_min instead of erroring, and
/// `*guarded` is set so callers can flag the particle.
inline Vec2 superposed_velocity_guarded(const Vec2& eval_point,
                                        const RotorConfig& rotors, double eps,
                                        double r_min, bool* guarded) {
  double eps_eff = eps;
  for (int i = 0; i < rotors.size(); ++i) {
    if ((eval_point - rotors.positions[i]).squaredNorm() < r_min * r_min) {
      eps_eff = std::max(eps_eff, r_min);
      if (guarded != nullptr) *guarded = true;
      break;
    }
  }
  Vec2 u = Vec2::Zero();
  const double eps2 = eps_eff * eps_eff;
  for (int i = 0; i < rotors.size(); ++i) {
    u -= rotors.strengths[i] *
         detail::rotlet_kernel(eval_point - rotors.positions[i], eps2);
  }
  return u;
}

/// The two controlled rotor-particle systems.
///
/// VelocityControl: the particle is advected by all rotors, rotor velocities
/// are prescribed directly. TorqueOnly: rotor j is advected by every rotor
/// i != j (no self-contribution).
class RotorSystem : public PhysicalModel {
 public:
  RotorSystem(int n_rotors, ControlMode mode, double eps = 0.0,
              double r_min = kDefaultRMin)
      : layout_{n_rotors}, mode_(mode), eps_(eps), r_min_(r_min) {}

  int state_dim() const override { return layout_.dim(); }
  int control_dim() const override { return swirl::control_dim(mode_, layout_.n_rotors); }
  int n_rotors() const { return layout_.n_rotors; }
  ControlMode mode() const { return mode_; }
  double eps() const { return eps_; }
  double r_min() const { return r_min_; }
  const StateLayout& layout() const { return layout_; }

  VectorXd rhs(const VectorXd& x, const VectorXd& u) const override {
    check_dims(x, u);
    const int n = layout_.n_rotors;
    const double eps2 = eps_ * eps_;
    VectorXd f = VectorXd::Zero(layout_.dim());

    const Vec2 p = StateLayout::particle(x);
    Vec2 up = Vec2::Zero();
    for (int i = 0; i < n; ++i) {
      const Vec2 d = p - layout_.rotor(x, i);
      detail::check_separation(d, eps_, r_min_, "particle advection");
      up -= u[i] * detail::rotlet_kernel(d, eps2);
    }
    f[0] = up.x();
    f[1] = up.y();

    if (mode_ == ControlMode::VelocityControl) {
      for (int i = 0; i < n; ++i) {
        f[layout_.rotor_x_index(i)] = u[n + i];
        f[layout_.rotor_y_index(i)] = u[2 * n + i];
      }
    } else {
      for (int j = 0; j < n; ++j) {
        Vec2 ur = Vec2::Zero();
        const Vec2 rj = layout_.rotor(x, j);
        for (int i = 0; i < n; ++i) {
          if (i == j) continue;
          const Vec2 d = rj - layout_.rotor(x, i);
          detail::check_separation(d, eps_, r_min_, "rotor advection");
          ur -= u[i] * detail::rotlet_kernel(d, eps2);
        }
        f[layout_.rotor_x_index(j)] = ur.x();
        f[layout_.rotor_y_index(j)] = ur.y();
      }
    }
    return f;
  }

  void derivatives(const VectorXd& x, const VectorXd& u, DerivativeBundle& out,
                   bool with_hessians) const override {
    check_dims(x, u);
    const int n = layout_.n_rotors;
    const double eps2 = eps_ * eps_;
    out.resize(layout_.dim(), control_dim(), with_hessians);

    const Vec2 p = StateLayout::particle(x);
    for (int i = 0; i < n; ++i) {
      const Vec2 d = p - layout_.rotor(x, i);
      detail::check_separation(d, eps_, r_min_, "particle advection");
      accumulate_pair(out, with_hessians, /*row0=*/0, /*rowy=*/1,
                      /*plus_x=*/0, /*plus_y=*/1,
                      /*minus_x=*/layout_.rotor_x_index(i),
                      /*minus_y=*/layout_.rotor_y_index(i),
                      /*control_col=*/i, u[i], d, eps2);
    }

    if (mode_ == ControlMode::VelocityControl) {
      for (int i = 0; i < n; ++i) {
        out.jac_control(layout_.rotor_x_index(i), n + i) = 1.0;
        out.jac_control(layout_.rotor_y_index(i), 2 * n + i) = 1.0;
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const Vec2 rj = layout_.rotor(x, j);
        for (int i = 0; i < n; ++i) {
          if (i == j) continue;
          const Vec2 d = rj - layout_.rotor(x, i);
          detail::check_separation(d, eps_, r_min_, "rotor advection");
          accumulate_pair(out, with_hessians, layout_.rotor_x_index(j),
                          layout_.rotor_y_index(j), layout_.rotor_x_index(j),
                          layout_.rotor_y_index(j), layout_.rotor_x_index(i),
                          layout_.rotor_y_index(i), i, u[i], d, eps2);
        }
      }
    }
  }

 private:
  // Adds the derivatives of one kernel term -g * g(d) to the output rows
  // (row0, rowy). d depends on state as d = x_plus - x_minus where
  // (plus_x, plus_y) and (minus_x, minus_y) are the flat indices of the two
  // endpoints; control_col is the strength entry driving this term.
  void accumulate_pair(DerivativeBundle& out, bool with_hessians, int row0,
                       int rowy, int plus_x, int plus_y, int minus_x,
                       int minus_y, int control_col, double strength,
                       const Vec2& d, double eps2) const {
    const Vec2 g = detail::rotlet_kernel(d, eps2);
    const Eigen::Matrix2d grad = detail::rotlet_kernel_grad(d, eps2);

    const int rows[2] = {row0, rowy};
    const int cols[4] = {plus_x, plus_y, minus_x, minus_y};
    const double sgn[4] = {1.0, 1.0, -1.0, -1.0};
    const int comp[4] = {0, 1, 0, 1};

    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 4; ++a) {
        out.jac_state(rows[c], cols[a]) += -strength * sgn[a] * grad(c, comp[a]);
      }
      out.jac_control(rows[c], control_col) += -g[c];
    }

    if (!with_hessians) return;
    const auto hess = detail::rotlet_kernel_hess(d, eps2);
    for (int c = 0; c < 2; ++c) {
      MatrixXd& hxx = out.hess_state_state[rows[c]];
      MatrixXd& hxu = out.hess_state_control[rows[c]];
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          hxx(cols[a], cols[b]) +=
              -strength * sgn[a] * sgn[b] * hess[c](comp[a], comp[b]);
        }
        hxu(cols[a], control_col) += -sgn[a] * grad(c, comp[a]);
      }
    }
  }

  void check_dims(const VectorXd& x, const VectorXd& u) const {
    if (x.size() != layout_.dim()) {
      throw DimensionMismatch("state dim " + std::to_string(x.size()) +
                              ", expected " + std::to_string(layout_.dim()));
    }
    if (u.size() != control_dim()) {
      throw DimensionMismatch("control dim " + std::to_string(u.size()) +
                              ", expected " + std::to_string(control_dim()));
    }
  }

  StateLayout layout_;
  ControlMode mode_;
  double eps_;
  double r_min_;
};

}  // namespace swirl
