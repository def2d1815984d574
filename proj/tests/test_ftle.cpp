#include <cmath>
#include <vector>

#include "doctest.h"
#include "swirl/errors.hpp"
#include "swirl/ftle.hpp"
#include "swirl/integrate.hpp"
#include "swirl/rotlet.hpp"
#include "swirl/types.hpp"

using swirl::CauchyGreenField;
using swirl::FlowMapField;
using swirl::FtleGridSpec;
using swirl::MatrixXd;
using swirl::RotorConfig;
using swirl::RotorHistoryField;
using swirl::Vec2;
using swirl::VectorXd;

namespace {

FtleGridSpec make_grid(double lo, double hi, int n) {
  FtleGridSpec g;
  g.lo = Vec2(lo, lo);
  g.hi = Vec2(hi, hi);
  g.nx = n;
  g.ny = n;
  return g;
}

// Analytic saddle u = (x, -y). The exact flow map is diag(e^t, e^-t).
class SaddleField : public swirl::TracerField {
 public:
  explicit SaddleField(int steps) : steps_(steps) {}
  int n_steps() const override { return steps_; }
  Vec2 velocity(int, const Vec2& x, bool*) const override {
    return {x.x(), -x.y()};
  }

 private:
  int steps_;
};

// Rigid rotation about the origin at rate omega.
class RotationField : public swirl::TracerField {
 public:
  RotationField(int steps, double omega) : steps_(steps), omega_(omega) {}
  int n_steps() const override { return steps_; }
  Vec2 velocity(int, const Vec2& x, bool*) const override {
    return {-omega_ * x.y(), omega_ * x.x()};
  }

 private:
  int steps_;
  double omega_;
};

class ConstantField : public swirl::TracerField {
 public:
  ConstantField(int steps, Vec2 u) : steps_(steps), u_(u) {}
  int n_steps() const override { return steps_; }
  Vec2 velocity(int, const Vec2&, bool*) const override { return u_; }

 private:
  int steps_;
  Vec2 u_;
};

// Stored playback of two equal rotors on a slowly turning diameter. The
// path is prescribed, not simulated; playback only needs a history.
std::vector<RotorConfig> turning_pair_history(int steps, double dt, double omega,
                                              double radius, double gamma) {
  std::vector<RotorConfig> configs(steps);
  for (int k = 0; k < steps; ++k) {
    const double th = omega * k * dt;
    RotorConfig cfg;
    cfg.positions = {Vec2(radius * std::cos(th), radius * std::sin(th)),
                     Vec2(-radius * std::cos(th), -radius * std::sin(th))};
    cfg.strengths = (VectorXd(2) << gamma, gamma).finished();
    configs[k] = cfg;
  }
  return configs;
}

std::vector<RotorConfig> static_pair_history(int steps, double g1, double g2) {
  RotorConfig cfg;
  cfg.positions = {Vec2(1.0, 0.0), Vec2(-1.0, 0.0)};
  cfg.strengths = (VectorXd(2) << g1, g2).finished();
  return std::vector<RotorConfig>(steps, cfg);
}

FlowMapField map_from_positions(const FtleGridSpec& grid,
                                const std::function<Vec2(const Vec2&)>& f) {
  FlowMapField fm;
  fm.grid = grid;
  fm.mapped.resize(grid.size(), 2);
  fm.flags.assign(grid.size(), 0);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      fm.mapped.row(grid.index(ix, iy)) = f(grid.node(ix, iy)).transpose();
    }
  }
  return fm;
}

}  // namespace

TEST_CASE("grid spec geometry and validation") {
  FtleGridSpec g = make_grid(-2.0, 2.0, 5);
  g.validate();
  CHECK(g.size() == 25);
  CHECK(g.hx() == doctest::Approx(1.0));
  CHECK(g.hy() == doctest::Approx(1.0));
  CHECK(g.node(0, 0) == Vec2(-2.0, -2.0));
  CHECK(g.node(4, 2) == Vec2(2.0, 0.0));
  CHECK(g.index(3, 2) == 13);  // x fastest

  FtleGridSpec too_coarse = make_grid(-1.0, 1.0, 3);
  too_coarse.nx = 2;
  CHECK_THROWS_AS(too_coarse.validate(), swirl::DimensionMismatch);
  too_coarse.nx = 3;
  too_coarse.ny = 1;
  CHECK_THROWS_AS(too_coarse.validate(), swirl::DimensionMismatch);

  FtleGridSpec flipped = make_grid(-1.0, 1.0, 3);
  flipped.hi = Vec2(-2.0, 1.0);
  CHECK_THROWS_AS(flipped.validate(), swirl::DimensionMismatch);
}

TEST_CASE("zero strength playback maps every node to itself") {
  // Domain chosen so no node coincides with the rotors at (+-1, 0).
  const FtleGridSpec grid = make_grid(-0.9, 0.9, 3);
  std::vector<RotorConfig> configs = static_pair_history(20, 0.0, 0.0);
  RotorHistoryField field(configs, 0.1);

  const FlowMapField fm = swirl::flow_map(grid, field, 0, 20, 0.01);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const int idx = grid.index(ix, iy);
      CHECK(fm.mapped(idx, 0) == grid.node(ix, iy).x());
      CHECK(fm.mapped(idx, 1) == grid.node(ix, iy).y());
      CHECK(fm.flags[idx] == 0);
    }
  }

  const swirl::FtleField f = swirl::ftle_field(swirl::cauchy_green(fm), 0.2);
  CHECK(f.sigma.cwiseAbs().maxCoeff() < 1e-12);

  // On a 3x3 grid only the center node has both neighbors on each axis.
  const swirl::CauchyGreenField cg = swirl::cauchy_green(fm);
  for (int idx = 0; idx < grid.size(); ++idx) {
    const bool is_center = (idx == grid.index(1, 1));
    CHECK(((cg.flags[idx] & swirl::kFlagBoundary) != 0) == !is_center);
  }
}

TEST_CASE("flow map window validation") {
  const FtleGridSpec grid = make_grid(-1.0, 1.0, 3);
  RotorHistoryField field(static_pair_history(10, 0.5, 0.5), 0.1);
  CHECK_THROWS_AS(swirl::flow_map(grid, field, 0, 0, 0.01), swirl::WindowOutOfRange);
  CHECK_THROWS_AS(swirl::flow_map(grid, field, -1, 5, 0.01), swirl::WindowOutOfRange);
  CHECK_THROWS_AS(swirl::flow_map(grid, field, 6, 5, 0.01), swirl::WindowOutOfRange);
  CHECK_NOTHROW(swirl::flow_map(grid, field, 5, 5, 0.01));
}

TEST_CASE("rigid rotation: nodes rotate by omega tau, radius kept, sigma zero") {
  const double omega = 0.8;
  const double dt = 0.01;
  const int steps = 150;
  const double tau = steps * dt;
  const FtleGridSpec grid = make_grid(-2.0, 2.0, 250);
  RotationField field(steps, omega);

  const FlowMapField fm = swirl::flow_map(grid, field, 0, steps, dt);
  const double th = omega * tau;
  const double c = std::cos(th);
  const double s = std::sin(th);
  double worst_pos = 0.0;
  double worst_radius = 0.0;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const int idx = grid.index(ix, iy);
      const Vec2 x0 = grid.node(ix, iy);
      const Vec2 expect(c * x0.x() - s * x0.y(), s * x0.x() + c * x0.y());
      const Vec2 got(fm.mapped(idx, 0), fm.mapped(idx, 1));
      worst_pos = std::max(worst_pos, (got - expect).norm());
      worst_radius = std::max(worst_radius, std::abs(got.norm() - x0.norm()));
      CHECK(fm.flags[idx] == 0);
    }
  }
  CHECK(worst_pos < 1e-8);
  CHECK(worst_radius < 1e-8);

  const swirl::FtleField f = swirl::ftle_field(swirl::cauchy_green(fm), tau);
  CHECK(f.sigma.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("saddle flow has unit ftle at every node") {
  // u = (x, -y): the flow map is diag(e^tau, e^-tau), so sigma = 1 exactly.
  const double dt = 0.01;
  const int steps = 120;
  const FtleGridSpec grid = make_grid(-2.0, 2.0, 250);
  SaddleField field(steps);

  const FlowMapField fm = swirl::flow_map(grid, field, 0, steps, dt);
  const swirl::FtleField f = swirl::ftle_field(swirl::cauchy_green(fm), steps * dt);
  CHECK((f.sigma.array() - 1.0).abs().maxCoeff() < 1e-3);
  for (std::uint8_t flag : fm.flags) CHECK(flag == 0);
}

TEST_CASE("cauchy-green of constructed maps") {
  const FtleGridSpec grid = make_grid(-1.5, 1.5, 7);

  SUBCASE("identity and translation both give the unit tensor") {
    for (Vec2 shift : {Vec2(0.0, 0.0), Vec2(0.7, -0.3)}) {
      const FlowMapField fm = map_from_positions(
          grid, [&](const Vec2& x) -> Vec2 { return x + shift; });
      const CauchyGreenField cg = swirl::cauchy_green(fm);
      for (int idx = 0; idx < grid.size(); ++idx) {
        CHECK(cg.tensor(idx, 0) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(std::abs(cg.tensor(idx, 1)) < 1e-13);
        CHECK(cg.tensor(idx, 2) == doctest::Approx(1.0).epsilon(1e-13));
      }
    }
  }

  SUBCASE("linear map recovers MtM, central and one-sided alike") {
    Eigen::Matrix2d m;
    m << 1.3, 0.4, -0.2, 0.8;
    const FlowMapField fm = map_from_positions(
        grid, [&](const Vec2& x) -> Vec2 { return m * x; });
    const CauchyGreenField cg = swirl::cauchy_green(fm);
    const Eigen::Matrix2d expect = m.transpose() * m;
    for (int idx = 0; idx < grid.size(); ++idx) {
      CHECK(cg.tensor(idx, 0) == doctest::Approx(expect(0, 0)).epsilon(1e-12));
      CHECK(cg.tensor(idx, 1) == doctest::Approx(expect(0, 1)).epsilon(1e-12));
      CHECK(cg.tensor(idx, 2) == doctest::Approx(expect(1, 1)).epsilon(1e-12));
    }
  }

  SUBCASE("boundary nodes are flagged, interior nodes are not") {
    const FlowMapField fm =
        map_from_positions(grid, [](const Vec2& x) -> Vec2 { return x; });
    const CauchyGreenField cg = swirl::cauchy_green(fm);
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        const bool edge = ix == 0 || ix == grid.nx - 1 || iy == 0 || iy == grid.ny - 1;
        CHECK(((cg.flags[grid.index(ix, iy)] & swirl::kFlagBoundary) != 0) == edge);
      }
    }
  }
}

TEST_CASE("ftle field edge cases") {
  const FtleGridSpec grid = make_grid(-1.0, 1.0, 3);
  CauchyGreenField cg;
  cg.grid = grid;
  cg.tensor.resize(grid.size(), 3);
  cg.flags.assign(grid.size(), 0);
  for (int idx = 0; idx < grid.size(); ++idx) {
    cg.tensor.row(idx) << 1.0, 0.0, 1.0;
  }

  SUBCASE("unit tensor gives exactly zero, for either tau sign") {
    CHECK(swirl::ftle_field(cg, 1.5).sigma.cwiseAbs().maxCoeff() == 0.0);
    CHECK(swirl::ftle_field(cg, -1.5).sigma.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("tau sign only enters through its magnitude") {
    cg.tensor.row(4) << 4.0, 1.0, 2.0;
    const VectorXd fwd = swirl::ftle_field(cg, 0.7).sigma;
    const VectorXd bwd = swirl::ftle_field(cg, -0.7).sigma;
    CHECK((fwd - bwd).cwiseAbs().maxCoeff() == 0.0);
    // lambda_max of [[4,1],[1,2]] is 3 + sqrt(2).
    CHECK(fwd[4] ==
          doctest::Approx(std::log(3.0 + std::sqrt(2.0)) / 1.4).epsilon(1e-12));
  }

  SUBCASE("zero tau is rejected") {
    CHECK_THROWS_AS(swirl::ftle_field(cg, 0.0), swirl::WindowOutOfRange);
  }

  SUBCASE("a clearly negative eigenvalue throws, roundoff negatives do not") {
    cg.tensor.row(0) << -1.0, 0.0, -1.0;
    CHECK_THROWS_AS(swirl::ftle_field(cg, 1.0), swirl::NegativeEigenvalue);
    cg.tensor.row(0) << -1e-12, 0.0, -1e-12;
    const swirl::FtleField f = swirl::ftle_field(cg, 1.0);
    CHECK(std::isfinite(f.sigma[0]));
    CHECK(f.sigma[0] < 0.0);  // clamped to the smallest positive double
  }
}

TEST_CASE("reversed playback returns forward tracers to their seeds") {
  const double dt = 0.01;
  const int stored = 60;
  const int m = 50;
  const double eps = 0.25;
  RotorHistoryField field(turning_pair_history(stored, dt, 0.5, 1.0, 0.6), eps);
  const RotorHistoryField rev = field.reversed();

  const FtleGridSpec grid = make_grid(-2.0, 2.0, 9);
  double worst = 0.0;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      VectorXd x = grid.node(ix, iy);
      for (int k = 0; k < m; ++k) {
        x = swirl::rk4_step(
            [&](const VectorXd& s) -> VectorXd {
              return field.velocity(k, Vec2(s[0], s[1]), nullptr);
            },
            x, dt);
      }
      // Undoing forward steps [0, m) means playing reversed steps
      // [stored - m, stored).
      for (int k = stored - m; k < stored; ++k) {
        x = swirl::rk4_step(
            [&](const VectorXd& s) -> VectorXd {
              return rev.velocity(k, Vec2(s[0], s[1]), nullptr);
            },
            x, dt);
      }
      worst = std::max(worst, (Vec2(x[0], x[1]) - grid.node(ix, iy)).norm());
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("analyze_history stamps the window and matches the reversal oracle") {
  const double dt = 0.01;
  const int stored = 120;
  const int k0 = 60;
  const int m = 40;
  RotorHistoryField field(turning_pair_history(stored, dt, 0.5, 1.0, 0.6), 0.25);
  const FtleGridSpec grid = make_grid(-2.0, 2.0, 41);

  const swirl::FtleAnalysis out = swirl::analyze_history(field, k0, m, grid, dt);
  CHECK(out.forward.t0 == doctest::Approx(0.6));
  CHECK(out.backward.t0 == doctest::Approx(0.6));
  CHECK(out.forward.tau == doctest::Approx(0.4));
  CHECK(out.backward.tau == doctest::Approx(-0.4));
  CHECK(out.forward.dt == dt);
  CHECK(out.backward.dt == dt);
  CHECK(out.forward.sigma.allFinite());
  CHECK(out.backward.sigma.allFinite());

  // The backward field is the forward field of the reversed playback,
  // started where the reversal puts step k0.
  const swirl::FtleAnalysis oracle =
      swirl::analyze_history(field.reversed(), stored - k0, m, grid, dt);
  CHECK((oracle.forward.sigma - out.backward.sigma).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(oracle.forward.flags == out.backward.flags);

  CHECK_THROWS_AS(swirl::analyze_history(field, 10, 20, grid, dt),
                  swirl::WindowOutOfRange);
  CHECK_THROWS_AS(swirl::analyze_history(field, 110, 20, grid, dt),
                  swirl::WindowOutOfRange);
  CHECK_THROWS_AS(swirl::analyze_history(field, k0, 0, grid, dt),
                  swirl::WindowOutOfRange);
}

TEST_CASE("tracers leaving the box freeze with a flag") {
  const FtleGridSpec grid = make_grid(-2.0, 2.0, 5);
  ConstantField field(150, Vec2(10.0, 0.0));

  SUBCASE("default box stops runaway tracers") {
    // box half-width = 0.5 * 4 * 4 = 8 about the origin
    const FlowMapField fm = swirl::flow_map(grid, field, 0, 120, 0.01);
    for (int idx = 0; idx < grid.size(); ++idx) {
      CHECK((fm.flags[idx] & swirl::kFlagFrozen) != 0);
      CHECK(fm.mapped(idx, 0) > 8.0);
      CHECK(fm.mapped(idx, 0) < 8.0 + 0.1 + 1e-12);  // froze within one step
      CHECK(fm.mapped(idx, 1) == doctest::Approx(grid.node(0, idx / 5).y()));
    }
  }

  SUBCASE("a wide box turns the same run into a clean translation") {
    const FlowMapField fm = swirl::flow_map(grid, field, 0, 100, 0.01, 1000.0);
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        const int idx = grid.index(ix, iy);
        CHECK(fm.flags[idx] == 0);
        CHECK(fm.mapped(idx, 0) ==
              doctest::Approx(grid.node(ix, iy).x() + 10.0).epsilon(1e-12));
        CHECK(fm.mapped(idx, 1) == doctest::Approx(grid.node(ix, iy).y()));
      }
    }
    const swirl::FtleField f = swirl::ftle_field(swirl::cauchy_green(fm), 1.0);
    CHECK(f.sigma.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("near-rotor guard flag propagates to the node") {
  // One zero-strength rotor sitting exactly on the center node: nothing
  // moves, but the kernel guard must still mark that node.
  RotorConfig cfg;
  cfg.positions = {Vec2(0.0, 0.0)};
  cfg.strengths = VectorXd::Zero(1);
  RotorHistoryField field(std::vector<RotorConfig>(5, cfg), 0.0);

  const FtleGridSpec grid = make_grid(-1.0, 1.0, 3);
  const FlowMapField fm = swirl::flow_map(grid, field, 0, 5, 0.01);
  for (int idx = 0; idx < grid.size(); ++idx) {
    const bool center = (idx == grid.index(1, 1));
    CHECK(((fm.flags[idx] & swirl::kFlagGuarded) != 0) == center);
  }
}

TEST_CASE("sigma is stable under grid refinement at shared nodes") {
  // 249 = 2 * 124 + 1, so every coarse node is also a fine node.
  const double dt = 0.01;
  const int steps = 50;
  // Wide blobs keep the field smooth enough for the differencing error to
  // sit well under the refinement tolerance near the rotors.
  RotorHistoryField field(static_pair_history(steps, 0.7, -0.4), 0.6);
  const FtleGridSpec coarse = make_grid(-2.0, 2.0, 125);
  const FtleGridSpec fine = make_grid(-2.0, 2.0, 249);

  const swirl::FtleField fc = swirl::ftle_field(
      swirl::cauchy_green(swirl::flow_map(coarse, field, 0, steps, dt)), steps * dt);
  const swirl::FtleField ff = swirl::ftle_field(
      swirl::cauchy_green(swirl::flow_map(fine, field, 0, steps, dt)), steps * dt);

  double worst = 0.0;
  for (int iy = 1; iy < coarse.ny - 1; ++iy) {
    for (int ix = 1; ix < coarse.nx - 1; ++ix) {
      const double a = fc.sigma[coarse.index(ix, iy)];
      const double b = ff.sigma[fine.index(2 * ix, 2 * iy)];
      worst = std::max(worst, std::abs(a - b));
    }
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("density histogram: normalization, binning, out-of-domain points") {
  MatrixXd pts(5, 2);
  pts << 0.25, 0.25,  //
      0.75, 0.25,     //
      0.25, 0.75,     //
      0.75, 0.75,     //
      1.5, 0.5;       // outside, ignored but still counted in N
  const swirl::DensityHistogram h =
      swirl::density_histogram(pts, Vec2(0.0, 0.0), Vec2(1.0, 1.0), 2, 2);
  CHECK(h.density.rows() == 2);
  CHECK(h.density.cols() == 2);
  for (int iy = 0; iy < 2; ++iy) {
    for (int ix = 0; ix < 2; ++ix) {
      CHECK(h.density(iy, ix) == doctest::Approx(0.8));  // 1 / (5 * 0.25)
    }
  }
  // Captured mass is the inside fraction.
  CHECK(h.density.sum() * 0.25 == doctest::Approx(4.0 / 5.0));
  CHECK(h.cell_cx(0) == doctest::Approx(0.25));
  CHECK(h.cell_cy(1) == doctest::Approx(0.75));

  MatrixXd edge(2, 2);
  edge << 0.0, 0.0,  // exactly at lo lands in cell 0
      1.0, 1.0;      // exactly at hi falls outside
  const swirl::DensityHistogram he =
      swirl::density_histogram(edge, Vec2(0.0, 0.0), Vec2(1.0, 1.0), 2, 2);
  CHECK(he.density(0, 0) == doctest::Approx(1.0 / (2.0 * 0.25)));
  CHECK(he.density(1, 1) == 0.0);
}
