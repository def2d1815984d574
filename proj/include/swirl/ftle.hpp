#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "swirl/errors.hpp"
#include "swirl/integrate.hpp"
#include "swirl/rotlet.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Node flag bits accumulated through the FTLE pipeline.
enum FtleFlag : std::uint8_t {
  kFlagBoundary = 1,   // one-sided difference used for the Jacobian
  kFlagFrozen = 2,     // tracer left the bounding box and was frozen
  kFlagGuarded = 4,    // a kernel evaluation needed the near-field clamp
};

/// Uniform inclusive grid of tracer seeds, x varying fastest in storage.
struct FtleGridSpec {
  Vec2 lo;
  Vec2 hi;
  int nx = 0;
  int ny = 0;

  int size() const { return nx * ny; }
  double hx() const { return (hi.x() - lo.x()) / (nx - 1); }
  double hy() const { return (hi.y() - lo.y()) / (ny - 1); }
  Vec2 node(int ix, int iy) const {
    return {lo.x() + ix * hx(), lo.y() + iy * hy()};
  }
  int index(int ix, int iy) const { return iy * nx + ix; }

  void validate() const {
    if (nx < 3 || ny < 3) {
      throw DimensionMismatch("FTLE grid needs at least 3 nodes per axis");
    }
    if (!(hi.x() > lo.x() && hi.y() > lo.y())) {
      throw DimensionMismatch("FTLE grid domain must have positive extent");
    }
  }
};

/// Velocity sampled from a time-discrete flow: the field is held constant
/// over each stored step (matching the control discretization).
class TracerField {
 public:
  virtual ~TracerField() = default;
  virtual int n_steps() const = 0;
  virtual Vec2 velocity(int step, const Vec2& x, bool* guarded) const = 0;
};

/// Playback of a stored rotor history: one configuration per step.
class RotorHistoryField : public TracerField {
 public:
  RotorHistoryField(std::vector<RotorConfig> configs, double eps,
                    double r_min = kDefaultRMin)
      : configs_(std::move(configs)), eps_(eps), r_min_(r_min) {}

  int n_steps() const override { return static_cast<int>(configs_.size()); }

  Vec2 velocity(int step, const Vec2& x, bool* guarded) const override {
    return superposed_velocity_guarded(x, configs_[step], eps_, r_min_, guarded);
  }

  /// The same flow run backward: step k plays the original step
  /// n_steps-1-k with negated strengths.
  RotorHistoryField reversed() const {
    std::vector<RotorConfig> rev(configs_.rbegin(), configs_.rend());
    for (auto& cfg : rev) cfg.strengths = -cfg.strengths;
    return RotorHistoryField(std::move(rev), eps_, r_min_);
  }

 private:
  std::vector<RotorConfig> configs_;
  double eps_;
  double r_min_;
};

struct FlowMapField {
  FtleGridSpec grid;
  MatrixXd mapped;  // size() x 2, grid storage order
  std::vector<std::uint8_t> flags;
};

/// Integrates one tracer per grid node through `steps` RK4 steps of the
/// field, starting at stored step `start_step`. Tracers leaving the bounding
/// box (the grid domain scaled by box_scale about its center) freeze in
/// place with a flag instead of accumulating runaway steps.
inline FlowMapField flow_map(const FtleGridSpec& grid, const TracerField& field,
                             int start_step, int steps, double dt,
                             double box_scale = 4.0) {
  grid.validate();
  if (steps < 1 || start_step < 0 || start_step + steps > field.n_steps()) {
    throw WindowOutOfRange("tracer window [" + std::to_string(start_step) + ", " +
                           std::to_string(start_step + steps) +
                           ") outside the stored " +
                           std::to_string(field.n_steps()) + " steps");
  }
  const Vec2 center = 0.5 * (grid.lo + grid.hi);
  const Vec2 half = 0.5 * box_scale * (grid.hi - grid.lo);
  const Vec2 box_lo = center - half;
  const Vec2 box_hi = center + half;

  FlowMapField out;
  out.grid = grid;
  out.mapped.resize(grid.size(), 2);
  out.flags.assign(grid.size(), 0);

  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const int idx = grid.index(ix, iy);
      VectorXd x = grid.node(ix, iy);
      bool guarded = false;
      for (int k = start_step; k < start_step + steps; ++k) {
        x = rk4_step(
            [&](const VectorXd& s) {
              VectorXd v(2);
              v = field.velocity(k, Vec2(s[0], s[1]), &guarded);
              return v;
            },
            x, dt);
        if (x[0] < box_lo.x() || x[0] > box_hi.x() || x[1] < box_lo.y() ||
            x[1] > box_hi.y()) {
          out.flags[idx] |= kFlagFrozen;
          break;
        }
      }
      if (guarded) out.flags[idx] |= kFlagGuarded;
      out.mapped.row(idx) = x.transpose();
    }
  }
  return out;
}

struct CauchyGreenField {
  FtleGridSpec grid;
  // Per node: the symmetric tensor entries (c11, c12, c22).
  MatrixXd tensor;  // size() x 3
  std::vector<std::uint8_t> flags;
};

/// C = J'J with the flow-map Jacobian from central differences of neighbor
/// mapped positions (one-sided and flagged on the boundary).
inline CauchyGreenField cauchy_green(const FlowMapField& fm) {
  const FtleGridSpec& g = fm.grid;
  CauchyGreenField out;
  out.grid = g;
  out.tensor.resize(g.size(), 3);
  out.flags = fm.flags;

  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int idx = g.index(ix, iy);
      const int xm = std::max(ix - 1, 0);
      const int xp = std::min(ix + 1, g.nx - 1);
      const int ym = std::max(iy - 1, 0);
      const int yp = std::min(iy + 1, g.ny - 1);
      if (ix == 0 || ix == g.nx - 1 || iy == 0 || iy == g.ny - 1) {
        out.flags[idx] |= kFlagBoundary;
      }
      const double dx = (xp - xm) * g.hx();
      const double dy = (yp - ym) * g.hy();
      Eigen::Matrix2d jac;
      jac.col(0) = (fm.mapped.row(g.index(xp, iy)) - fm.mapped.row(g.index(xm, iy)))
                       .transpose() / dx;
      jac.col(1) = (fm.mapped.row(g.index(ix, yp)) - fm.mapped.row(g.index(ix, ym)))
                       .transpose() / dy;
      const Eigen::Matrix2d c = jac.transpose() * jac;
      out.tensor(idx, 0) = c(0, 0);
      out.tensor(idx, 1) = c(0, 1);
      out.tensor(idx, 2) = c(1, 1);
    }
  }
  return out;
}

struct FtleField {
  FtleGridSpec grid;
  VectorXd sigma;  // grid storage order
  std::vector<std::uint8_t> flags;
  double t0 = 0.0;
  double tau = 0.0;
  double dt = 0.0;
};

/// sigma = log(lambda_max(C)) / (2 |tau|) with the closed-form symmetric 2x2
/// eigenvalue. C is positive semidefinite by construction; an eigenvalue
/// below -1e-10 signals a broken assembly and throws.
inline FtleField ftle_field(const CauchyGreenField& cg, double tau) {
  if (tau == 0.0) throw WindowOutOfRange("FTLE needs tau != 0");
  FtleField out;
  out.grid = cg.grid;
  out.flags = cg.flags;
  out.tau = tau;
  out.sigma.resize(cg.grid.size());
  for (int idx = 0; idx < cg.grid.size(); ++idx) {
    const double a = cg.tensor(idx, 0);
    const double b = cg.tensor(idx, 1);
    const double c = cg.tensor(idx, 2);
    const double mean = 0.5 * (a + c);
    const double radius = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    double lmax = mean + radius;
    if (lmax < -1e-10) {
      throw NegativeEigenvalue("Cauchy-Green lambda_max = " + std::to_string(lmax) +
                               " at node " + std::to_string(idx));
    }
    lmax = std::max(lmax, std::numeric_limits<double>::min());
    out.sigma[idx] = std::log(lmax) / (2.0 * std::abs(tau));
  }
  return out;
}

struct FtleAnalysis {
  FtleField forward;
  FtleField backward;
};

/// Forward and backward FTLE fields from the same start step k0: the forward
/// span integrates stored steps [k0, k0+m), the backward one replays steps
/// [k0-m, k0) in reverse with negated strengths.
inline FtleAnalysis analyze_history(const RotorHistoryField& field, int k0,
                                    int m, const FtleGridSpec& grid, double dt,
                                    double box_scale = 4.0) {
  const int stored = field.n_steps();
  if (m < 1 || k0 + m > stored || k0 - m < 0) {
    throw WindowOutOfRange("FTLE window of " + std::to_string(m) +
                           " steps around step " + std::to_string(k0) +
                           " leaves the stored horizon of " +
                           std::to_string(stored) + " steps");
  }
  FtleAnalysis out;
  out.forward =
      ftle_field(cauchy_green(flow_map(grid, field, k0, m, dt, box_scale)), m * dt);
  const RotorHistoryField reversed = field.reversed();
  out.backward = ftle_field(
      cauchy_green(flow_map(grid, reversed, stored - k0, m, dt, box_scale)),
      -m * dt);
  out.forward.t0 = out.backward.t0 = k0 * dt;
  out.forward.dt = out.backward.dt = dt;
  return out;
}

/// 2-D histogram density estimate on the grid domain (cells, not nodes):
/// counts normalized by N * cell area. Points outside the domain are
/// ignored.
struct DensityHistogram {
  Vec2 lo;
  Vec2 hi;
  int nx = 0;
  int ny = 0;
  MatrixXd density;  // ny x nx, row iy, col ix

  double cell_cx(int ix) const { return lo.x() + (ix + 0.5) * (hi.x() - lo.x()) / nx; }
  double cell_cy(int iy) const { return lo.y() + (iy + 0.5) * (hi.y() - lo.y()) / ny; }
};

inline DensityHistogram density_histogram(const MatrixXd& points, const Vec2& lo,
                                          const Vec2& hi, int nx, int ny) {
  DensityHistogram h;
  h.lo = lo;
  h.hi = hi;
  h.nx = nx;
  h.ny = ny;
  h.density = MatrixXd::Zero(ny, nx);
  const double wx = (hi.x() - lo.x()) / nx;
  const double wy = (hi.y() - lo.y()) / ny;
  const int n = static_cast<int>(points.rows());
  for (int i = 0; i < n; ++i) {
    const int ix = static_cast<int>(std::floor((points(i, 0) - lo.x()) / wx));
    const int iy = static_cast<int>(std::floor((points(i, 1) - lo.y()) / wy));
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) continue;
    h.density(iy, ix) += 1.0;
  }
  h.density /= n * wx * wy;
  return h;
}

}  // namespace swirl
