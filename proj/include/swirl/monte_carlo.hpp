#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "swirl/cost.hpp"
#include "swirl/errors.hpp"
#include "swirl/integrate.hpp"
#include "swirl/rotlet.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Inverse standard normal CDF, Wichura's PPND16 rational approximations
/// (Applied Statistics algorithm AS 241), accurate to about 1e-16 relative.
/// Used instead of std::normal_distribution so ensembles are bit-reproducible
/// across standard libraries.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                   6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
               1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

/// Seeded Gaussian stream: mt19937_64 words mapped to open-interval uniforms
/// u = ((word >> 11) + 0.5) * 2^-53, then through the inverse CDF.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return inverse_normal_cdf(uniform()); }

 private:
  std::mt19937_64 gen_;
};

struct ParticleEnsemble {
  MatrixXd points;  // N x 2
  std::vector<std::uint8_t> flags;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(points.rows()); }
};

struct SampleMoments {
  Vec2 mean;
  Eigen::Matrix2d cov;
};

/// N independent draws from N(mean, diag(stdev^2)), x before y per particle.
inline ParticleEnsemble sample_initial(const Vec2& mean, const Vec2& stdev,
                                       int n_particles, std::uint64_t seed) {
  if (n_particles < 1) throw DimensionMismatch("ensemble needs n_particles >= 1");
  ParticleEnsemble ens;
  ens.seed = seed;
  ens.points.resize(n_particles, 2);
  ens.flags.assign(n_particles, 0);
  GaussianSampler sampler(seed);
  for (int i = 0; i < n_particles; ++i) {
    ens.points(i, 0) = mean.x() + stdev.x() * sampler.normal();
    ens.points(i, 1) = mean.y() + stdev.y() * sampler.normal();
  }
  return ens;
}

namespace detail {

/// Joint particle+rotor rhs with the near-singularity clamp: any kernel
/// evaluation inside r_min switches that evaluation to eps = r_min and marks
/// `guarded` instead of throwing.
inline VectorXd guarded_joint_rhs(const VectorXd& x, const VectorXd& u,
                                  const StateLayout& lay, ControlMode mode,
                                  double eps, double r_min, bool& guarded) {
  const int n = lay.n_rotors;
  VectorXd f = VectorXd::Zero(lay.dim());

  RotorConfig cfg = lay.rotors(x, u.head(n));
  f.head<2>() = superposed_velocity_guarded(StateLayout::particle(x), cfg, eps,
                                            r_min, &guarded);

  if (mode == ControlMode::VelocityControl) {
    for (int i = 0; i < n; ++i) {
      f[lay.rotor_x_index(i)] = u[n + i];
      f[lay.rotor_y_index(i)] = u[2 * n + i];
    }
  } else {
    for (int j = 0; j < n; ++j) {
      const Vec2 rj = lay.rotor(x, j);
      double eps_eff = eps;
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        if ((rj - cfg.positions[i]).squaredNorm() < r_min * r_min) {
          eps_eff = std::max(eps_eff, r_min);
          guarded = true;
          break;
        }
      }
      Vec2 ur = Vec2::Zero();
      const double eps2 = eps_eff * eps_eff;
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        ur -= u[i] * rotlet_kernel(rj - cfg.positions[i], eps2);
      }
      f[lay.rotor_x_index(j)] = ur.x();
      f[lay.rotor_y_index(j)] = ur.y();
    }
  }
  return f;
}

template <class T>
T pairwise_reduce(const std::vector<T>& items, int lo, int hi) {
  if (hi - lo == 1) return items[lo];
  const int mid = lo + (hi - lo) / 2;
  return pairwise_reduce(items, lo, mid) + pairwise_reduce(items, mid, hi);
}

}  // namespace detail

/// Advects the ensemble through the stored rotor motion: at each step the
/// particle is co-integrated with the rotors from their stored state, so a
/// zero-variance particle retraces the surrogate's zeroth-coefficient path.
/// Returns one snapshot per time index (controls.size() + 1 total). Flags
/// accumulate per particle across the whole horizon.
inline std::vector<ParticleEnsemble> advect(
    const ParticleEnsemble& initial, const std::vector<VectorXd>& rotor_states,
    const std::vector<VectorXd>& controls, double dt, ControlMode mode,
    double eps = 0.0, double r_min = kDefaultRMin) {
  const int steps = static_cast<int>(controls.size());
  if (static_cast<int>(rotor_states.size()) != steps + 1) {
    throw DimensionMismatch("rotor_states must have controls.size() + 1 entries");
  }
  const int n_rotors = static_cast<int>(rotor_states[0].size()) / 2;
  const StateLayout lay{n_rotors};

  std::vector<ParticleEnsemble> history;
  history.reserve(steps + 1);
  history.push_back(initial);

  VectorXd joint(lay.dim());
  for (int t = 0; t < steps; ++t) {
    const ParticleEnsemble& prev = history.back();
    ParticleEnsemble next = prev;
    for (int p = 0; p < prev.n(); ++p) {
      joint.head<2>() = prev.points.row(p).transpose();
      joint.tail(2 * n_rotors) = rotor_states[t];
      bool guarded = false;
      const VectorXd stepped = rk4_step(
          [&](const VectorXd& s) {
            return detail::guarded_joint_rhs(s, controls[t], lay, mode, eps,
                                             r_min, guarded);
          },
          joint, dt);
      next.points.row(p) = stepped.head<2>().transpose();
      if (guarded) next.flags[p] |= 1;
    }
    history.push_back(std::move(next));
  }
  return history;
}

/// Unbiased sample mean and covariance (divisor N-1) with pairwise summation
/// so the result is independent of any parallel split. N=1 yields NaN
/// covariance.
inline SampleMoments sample_moments(const ParticleEnsemble& ens) {
  const int n = ens.n();
  std::vector<Vec2> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = ens.points.row(i).transpose();
  SampleMoments m;
  m.mean = detail::pairwise_reduce(pts, 0, n) / n;
  if (n < 2) {
    m.cov.setConstant(std::numeric_limits<double>::quiet_NaN());
    return m;
  }
  std::vector<Eigen::Matrix2d> outers(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 d = pts[i] - m.mean;
    outers[i] = d * d.transpose();
  }
  m.cov = detail::pairwise_reduce(outers, 0, n) / (n - 1);
  return m;
}

/// The moment-tracking cost evaluated on sample moments instead of the
/// surrogate's: sum of stage terms over the horizon plus the terminal term.
inline double true_cost(const std::vector<SampleMoments>& moment_history,
                        const std::vector<VectorXd>& controls,
                        const CostWeights& w, const MomentTarget& target) {
  if (moment_history.size() != controls.size() + 1) {
    throw DimensionMismatch("moment history must have controls.size() + 1 entries");
  }
  auto output_of = [](const SampleMoments& m) {
    return Eigen::Vector4d(m.mean.x(), m.mean.y(), m.cov(0, 0), m.cov(1, 1));
  };
  double c = 0.0;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    const Eigen::Vector4d e = output_of(moment_history[t]) - target.y_ref;
    c += e.dot(w.s.asDiagonal() * e) +
         controls[t].dot(w.r.asDiagonal() * controls[t]);
  }
  const Eigen::Vector4d e = output_of(moment_history.back()) - target.y_ref;
  return c + e.dot(w.s_h.asDiagonal() * e);
}

inline double true_cost(const std::vector<ParticleEnsemble>& ensembles,
                        const std::vector<VectorXd>& controls,
                        const CostWeights& w, const MomentTarget& target) {
  std::vector<SampleMoments> moments;
  moments.reserve(ensembles.size());
  for (const auto& e : ensembles) moments.push_back(sample_moments(e));
  return true_cost(moments, controls, w, target);
}

}  // namespace swirl
