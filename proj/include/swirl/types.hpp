#pragma once

#include <Eigen/Dense>

namespace swirl {

using Vec2 = Eigen::Vector2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Actuation model for a rotor group.
///  - VelocityControl: strengths and translational velocities are inputs,
///    u = [g_1..g_n, v_x1..v_xn, v_y1..v_yn], dim 3n.
///  - TorqueOnly: strengths are the only inputs, rotors ride the flow of the
///    other rotors, u = [g_1..g_n], dim n.
enum class ControlMode { VelocityControl, TorqueOnly };

inline int control_dim(ControlMode mode, int n_rotors) {
  return mode == ControlMode::VelocityControl ? 3 * n_rotors : n_rotors;
}

/// Physical state layout: [x_p, y_p, x_r1..x_rn, y_r1..y_rn], dim 2(n+1).
inline int state_dim(int n_rotors) { return 2 * (n_rotors + 1); }

/// Default guard radius below which an unregularized kernel evaluation is
/// treated as singular.
inline constexpr double kDefaultRMin = 1e-4;

}  // namespace swirl
