#pragma once

// Navigation / execution uncertainty and Gaussian quantiles.

#include "itg/astro.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace itg {

using Covariance6 = Mat6;

struct UncertaintyConfig {
  double beta = 1.0;
  Mat6 q_process = Mat6::Identity() * 1e-4;  // m^2 per drift step
  double gates_mag_frac = 0.01;
  double gates_mag_fixed = 1e-4;             // m/s
  double gates_point_sigma = 0.0175;         // rad
  double tau_s = orbital_period(reference_chief());  // s
  double drift_step = 900.0;                 // s, spacing of the passive-safety drift grid
  double delta_risk = 0.01;

  void validate() const {
    if (!(beta > 0.0)) throw std::domain_error("uncertainty: beta must be positive");
    if (!(tau_s > 0.0)) throw std::domain_error("uncertainty: tau_s must be positive");
    if (!(drift_step > 0.0)) throw std::domain_error("uncertainty: drift_step must be positive");
    if (!(delta_risk > 0.0 && delta_risk < 0.5)) {
      throw std::domain_error("uncertainty: delta_risk must be in (0, 0.5)");
    }
    if (!q_process.isApprox(q_process.transpose(), 1e-12) && !q_process.isZero()) {
      throw std::domain_error("uncertainty: q_process must be symmetric");
    }
    if (gates_mag_frac < 0.0 || gates_mag_fixed < 0.0 || gates_point_sigma < 0.0) {
      throw std::domain_error("uncertainty: Gates parameters must be nonnegative");
    }
  }
};

namespace detail {

// erfc(x) for x >= 0. Power series of erf below 2.5 (all-positive form
// erf(x) = 2/sqrt(pi) exp(-x^2) sum 2^n x^(2n+1) / (2n+1)!!), Lentz continued
// fraction above.
inline double erfc_nonneg(double x) {
  constexpr double inv_sqrt_pi = 0.56418958354775628695;
  if (x < 2.5) {
    double term = x;
    double sum = x;
    const double x2 = x * x;
    for (int n = 1; n < 200; ++n) {
      term *= 2.0 * x2 / (2.0 * n + 1.0);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return 1.0 - 2.0 * inv_sqrt_pi * std::exp(-x2) * sum;
  }
  // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  constexpr double tiny = 1e-300;
  double f = x;
  double C = x;
  double D = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double a = 0.5 * k;
    D = x + a * D;
    D = std::abs(D) < tiny ? tiny : D;
    C = x + a / C;
    C = std::abs(C) < tiny ? tiny : C;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return inv_sqrt_pi * std::exp(-x * x) / f;
}

}  // namespace detail

inline double normal_cdf(double z) {
  const double x = z / std::numbers::sqrt2;
  if (x >= 0.0) return 1.0 - 0.5 * detail::erfc_nonneg(x);
  return 0.5 * detail::erfc_nonneg(-x);
}

/// Standard-normal quantile by bisection on normal_cdf.
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must be in (0,1)");
  if (p > 0.5) return -inverse_normal_cdf(1.0 - p);
  if (p == 0.5) return 0.0;
  double lo = -40.0, hi = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Quantile used by the deterministic chance constraint: q(delta) = Phi^-1(1 - delta).
inline double risk_quantile(double delta) { return inverse_normal_cdf(1.0 - delta); }

/// Per-metre-of-range navigation sigma, s = beta 1e-3 [0.1, 4, 2, 2, 2, 2].
inline Vec6 nav_sigma_per_meter(double beta) {
  Vec6 s;
  s << 0.1, 4.0, 2.0, 2.0, 2.0, 2.0;
  return beta * 1e-3 * s;
}

/// Range-dependent navigation covariance rho(x) s s^T.
inline Covariance6 nav_covariance(const RoeState& x, double beta, const OrbitalElements& oe, double t,
                                  const GravityModel& g = kEarth) {
  const Vec6 s = nav_sigma_per_meter(beta);
  return range(x, oe, t, g) * s * s.transpose();
}

/// Gates execution-error covariance of an RTN impulse: proportional magnitude
/// error along u, pointing error across it, and the fixed magnitude term taken
/// isotropic so the model is smooth through u = 0.
inline Mat3 exe_covariance(const Impulse& u, const UncertaintyConfig& cfg) {
  const Vec3& v = u.dv;
  const double f2 = cfg.gates_mag_fixed * cfg.gates_mag_fixed;
  const double a2 = cfg.gates_mag_frac * cfg.gates_mag_frac;
  const double p2 = cfg.gates_point_sigma * cfg.gates_point_sigma;
  const Mat3 uu = v * v.transpose();
  return f2 * Mat3::Identity() + a2 * uu + p2 * (v.squaredNorm() * Mat3::Identity() - uu);
}

inline Covariance6 initial_dispersion(const RoeState& x, const Impulse& u, const OrbitalElements& oe,
                                      double t, const UncertaintyConfig& cfg,
                                      const GravityModel& g = kEarth) {
  const Mat63 gam = control_input_matrix(oe, t, g);
  Covariance6 sigma = nav_covariance(x, cfg.beta, oe, t, g) + gam * exe_covariance(u, cfg) * gam.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

inline Covariance6 propagate_covariance(const Covariance6& sigma, const Mat6& phi, const Covariance6& q) {
  Covariance6 out = phi * sigma * phi.transpose() + q;
  return 0.5 * (out + out.transpose());
}

}  // namespace itg
