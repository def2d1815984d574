#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "swirl/gpc.hpp"
#include "swirl/integrate.hpp"
#include "swirl/rotlet.hpp"
#include "support/test_util.hpp"

using namespace swirl;
using testutil::TestRng;

namespace {

class LinearModel : public PhysicalModel {
 public:
  LinearModel(MatrixXd a, MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {}

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int control_dim() const override { return static_cast<int>(b_.cols()); }

  VectorXd rhs(const VectorXd& x, const VectorXd& u) const override {
    return a_ * x + b_ * u;
  }

  void derivatives(const VectorXd&, const VectorXd&, DerivativeBundle& out,
                   bool with_hessians) const override {
    out.resize(state_dim(), control_dim(), with_hessians);
    out.jac_state = a_;
    out.jac_control = b_;
  }

 private:
  MatrixXd a_, b_;
};

struct Scenario4Setup {
  HermiteBasis basis{2, 3};
  QuadratureRule quad = tensor_gauss_hermite(2, 8);
  GpcProjector proj{basis, quad};
  RotorSystem sys{4, ControlMode::VelocityControl};
  GpcState x0;

  Scenario4Setup() {
    VectorXd mean(2), stdev(2), rotors(8);
    mean << 1.0, 1.0;
    stdev << std::sqrt(0.025), std::sqrt(0.025);
    // Ring of radius 0.2 about (-1,-1), angles 0, 90, 180, 270 degrees.
    rotors << -0.8, -1.0, -1.2, -1.0, -1.0, -0.8, -1.0, -1.2;
    x0 = project_gaussian_initial(mean, stdev, rotors, basis);
  }
};

}  // namespace

TEST_CASE("gaussian projection coefficients") {
  HermiteBasis basis(2, 3);
  VectorXd mean(2), stdev(2), rotors(4);
  mean << 1.0, 1.0;
  stdev << std::sqrt(0.025), std::sqrt(0.025);
  rotors << -0.8, -1.2, -1.0, -1.0;
  const GpcState x = project_gaussian_initial(mean, stdev, rotors, basis);

  CHECK(x.rows() == 6);
  CHECK(x.cols() == 10);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(1, 0) == 1.0);
  CHECK(x(0, 1) == doctest::Approx(0.158114).epsilon(1e-5));
  CHECK(x(1, 2) == x(0, 1));
  CHECK(x(0, 2) == 0.0);
  CHECK(x(1, 1) == 0.0);
  for (int k = 0; k < 4; ++k) {
    CHECK(x(2 + k, 0) == rotors[k]);
    CHECK(x.row(2 + k).tail(9).cwiseAbs().maxCoeff() == 0.0);
  }
  // Degree >= 2 coefficients of the stochastic rows vanish.
  CHECK(x.block(0, 3, 2, 7).cwiseAbs().maxCoeff() == 0.0);

  const MomentVector m = moments(x, basis);
  CHECK((m.mean.head<2>() - mean).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(m.cov(0, 0) - 0.025) < 1e-14);
  CHECK(std::abs(m.cov(1, 1) - 0.025) < 1e-14);
  CHECK(std::abs(m.cov(0, 1)) < 1e-14);
  CHECK(m.cov.bottomRows(4).cwiseAbs().maxCoeff() == 0.0);

  const GpcState sharp = project_gaussian_initial(mean, VectorXd::Zero(2), rotors, basis);
  CHECK(sharp.rightCols(9).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(project_gaussian_initial(VectorXd::Zero(3), stdev, rotors, basis),
                  DimensionMismatch);
}

TEST_CASE("moment recovery against direct quadrature") {
  HermiteBasis basis(2, 3);
  const QuadratureRule quad = tensor_gauss_hermite(2, 8);
  TestRng rng(21);
  GpcState x(3, basis.size());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);

  const MomentVector m = moments(x, basis);
  CHECK((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  VectorXd mean_q = VectorXd::Zero(3);
  for (int q = 0; q < quad.size(); ++q) {
    mean_q += quad.weights[q] * (x * basis.eval_all(quad.node(q)));
  }
  CHECK((m.mean - mean_q).cwiseAbs().maxCoeff() < 1e-10);

  MatrixXd cov_q = MatrixXd::Zero(3, 3);
  for (int q = 0; q < quad.size(); ++q) {
    const VectorXd dev = x * basis.eval_all(quad.node(q)) - mean_q;
    cov_q.noalias() += quad.weights[q] * dev * dev.transpose();
  }
  CHECK((m.cov - cov_q).cwiseAbs().maxCoeff() < 1e-10);

  GpcState zeroth = GpcState::Zero(3, basis.size());
  zeroth.col(0) << 4.0, -1.0, 0.5;
  const MomentVector mz = moments(zeroth, basis);
  CHECK(mz.cov.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mz.mean == zeroth.col(0));
}

TEST_CASE("galerkin rhs: zero field and linear decoupling") {
  HermiteBasis basis(2, 2);
  GpcProjector proj(basis, tensor_gauss_hermite(2, 6));

  LinearModel zero(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1));
  TestRng rng(22);
  GpcState x(2, basis.size());
  for (int i = 0; i < x.size(); ++i) x(i / basis.size(), i % basis.size()) = rng.uniform(-1, 1);
  CHECK(galerkin_rhs(x, VectorXd::Zero(1), zero, proj).cwiseAbs().maxCoeff() == 0.0);

  MatrixXd a(2, 2), b(2, 1);
  a << -0.3, 1.2, -1.2, -0.3;
  b << 1.0, -0.2;
  LinearModel lin(a, b);
  const VectorXd u = VectorXd::Constant(1, 0.7);
  const GpcState dx = galerkin_rhs(x, u, lin, proj);
  GpcState want = a * x;
  want.col(0) += b * u;
  CHECK((dx - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("galerkin rhs matches monte carlo projection of the rotlet field") {
  Scenario4Setup s;
  VectorXd u = VectorXd::Zero(12);

  // Zero strengths and velocities: the field vanishes identically.
  CHECK(galerkin_rhs(s.x0, u, s.sys, s.proj).cwiseAbs().maxCoeff() == 0.0);

  u.head(4).setConstant(1.0);
  const GpcState dx = galerkin_rhs(s.x0, u, s.sys, s.proj);
  CHECK(dx.bottomRows(8).cwiseAbs().maxCoeff() == 0.0);  // rotors at rest

  const int n_samples = 1000000;
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  const RotorConfig cfg = s.sys.layout().rotors(
      s.proj.states_at_nodes(s.x0).col(0), u.head(4));

  MatrixXd sum = MatrixXd::Zero(2, s.basis.size());
  MatrixXd sumsq = MatrixXd::Zero(2, s.basis.size());
  VectorXd z(2);
  for (int n = 0; n < n_samples; ++n) {
    z << normal(gen), normal(gen);
    const Vec2 p(1.0 + std::sqrt(0.025) * z[0], 1.0 + std::sqrt(0.025) * z[1]);
    const Vec2 f = superposed_velocity(p, cfg);
    const VectorXd phi = s.basis.eval_all(z);
    for (int j = 0; j < s.basis.size(); ++j) {
      const double w = phi[j] / s.basis.norm(j);
      for (int i = 0; i < 2; ++i) {
        const double val = f[i] * w;
        sum(i, j) += val;
        sumsq(i, j) += val * val;
      }
    }
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < s.basis.size(); ++j) {
      const double mc = sum(i, j) / n_samples;
      const double var_of_mean =
          (sumsq(i, j) / n_samples - mc * mc) / (n_samples - 1.0);
      const double se = std::sqrt(std::max(var_of_mean, 0.0));
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(dx(i, j) - mc) <= 3.0 * se);
    }
  }
}

TEST_CASE("quadrature order is converged for the transport scenario") {
  Scenario4Setup s;
  GpcProjector fine(s.basis, tensor_gauss_hermite(2, 12));
  VectorXd u = VectorXd::Zero(12);
  u.head(4).setConstant(1.0);
  const GpcState coarse_dx = galerkin_rhs(s.x0, u, s.sys, s.proj);
  const GpcState fine_dx = galerkin_rhs(s.x0, u, s.sys, fine);
  CHECK((coarse_dx - fine_dx).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("propagation: constants, determinism, and singular reconstructions") {
  Scenario4Setup s;
  const std::vector<VectorXd> hold(50, VectorXd::Zero(12));
  const auto states = propagate(s.x0, hold, 0.01, s.sys, s.proj);
  CHECK(states.size() == 51);
  CHECK(states.back() == states.front());

  // Zero variance reduces coefficient propagation to the plain state rollout.
  VectorXd mean(2), rotors(4);
  mean << 0.9, 1.1;
  rotors << -0.8, -1.2, -1.0, -1.0;
  RotorSystem sys2(2, ControlMode::VelocityControl);
  HermiteBasis basis = s.basis;
  const GpcState sharp = project_gaussian_initial(mean, VectorXd::Zero(2), rotors, basis);
  VectorXd u(6);
  u << 0.8, -0.5, 0.1, -0.05, 0.02, 0.1;
  const std::vector<VectorXd> controls(80, u);
  const auto coeff_states = propagate(sharp, controls, 0.01, sys2, s.proj);

  VectorXd x = sharp.col(0);
  for (int t = 0; t < 80; ++t) x = rk4_step(sys2, x, u, 0.01);
  CHECK((coeff_states.back().col(0) - x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(coeff_states.back().rightCols(9).cwiseAbs().maxCoeff() < 1e-10);

  // A rotor sitting on the reconstructed particle point is singular.
  VectorXd bad_rotors(4);
  bad_rotors << 0.9, -1.2, 1.1, -1.0;
  const GpcState bad = project_gaussian_initial(mean, VectorXd::Zero(2), bad_rotors, basis);
  CHECK_THROWS_AS(propagate(bad, controls, 0.01, sys2, s.proj), SingularEvaluation);
}

TEST_CASE("linear gaussian propagation matches the closed form") {
  MatrixXd a(2, 2), b(2, 2);
  a << -0.3, 1.2, -1.2, -0.3;
  b << 1.0, 0.3, -0.2, 0.8;
  LinearModel lin(a, b);

  HermiteBasis basis(2, 3);
  GpcProjector proj(basis, tensor_gauss_hermite(2, 8));
  VectorXd mean(2), stdev(2), u0(2);
  mean << 0.7, -0.4;
  stdev << 0.3, 0.15;
  u0 << 0.5, -0.2;
  const GpcState x0 = project_gaussian_initial(mean, stdev, VectorXd(), basis);

  const int steps = 1000;
  const double dt = 0.01;
  const std::vector<VectorXd> controls(steps, u0);
  const auto states = propagate(x0, controls, dt, lin, proj);

  const Vec2 drift = a.inverse() * (b * u0);
  const MatrixXd cov0 = stdev.array().square().matrix().asDiagonal();
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int t = 0; t <= steps; ++t) {
    const double time = t * dt;
    const double decay = std::exp(-0.3 * time);
    MatrixXd rot(2, 2);
    rot << std::cos(1.2 * time), std::sin(1.2 * time),
        -std::sin(1.2 * time), std::cos(1.2 * time);
    const MatrixXd m = decay * rot;
    const Vec2 mean_t = m * (Vec2(mean) + drift) - drift;
    const MatrixXd cov_t = m * cov0 * m.transpose();
    const MomentVector got = moments(states[t], basis);
    worst_mean = std::max(worst_mean, (got.mean - mean_t).cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, (got.cov - cov_t).cwiseAbs().maxCoeff());
  }
  CHECK(worst_mean < 1e-8);
  CHECK(worst_cov < 1e-8);
}

TEST_CASE("flatten and unflatten round trip row-major") {
  GpcState x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const VectorXd v = flatten(x);
  CHECK(v.size() == 6);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 2.0);
  CHECK(v[2] == 3.0);
  CHECK(v[3] == 4.0);
  const GpcState back = unflatten(v, 2);
  CHECK(back == x);
  CHECK_THROWS_AS(unflatten(VectorXd::Zero(7), 2), DimensionMismatch);
}
