#pragma once

// Test-only reference: absolute mean-element propagation of chief and deputy
// with secular J2 rates, and the nonlinear element <-> qnsROE maps. Used to
// check the closed-form STM by finite differences.

#include "itg/astro.hpp"

#include <cmath>

namespace itg::oracle {

inline OrbitalElements propagate_mean(const OrbitalElements& oe, double dt, const GravityModel& g) {
  const double n = std::sqrt(g.mu / (oe.a * oe.a * oe.a));
  const double eta = std::sqrt(1.0 - oe.e * oe.e);
  const double p = oe.a * eta * eta;
  const double f = 0.75 * n * g.j2 * (g.r_earth / p) * (g.r_earth / p);
  const double c = std::cos(oe.i);
  OrbitalElements out = oe;
  out.raan += -2.0 * f * c * dt;
  out.argp += f * (5.0 * c * c - 1.0) * dt;
  out.M += (n + f * eta * (3.0 * c * c - 1.0)) * dt;
  return out;
}

inline Vec6 roe_of(const OrbitalElements& c, const OrbitalElements& d) {
  Vec6 r;
  r[0] = (d.a - c.a) / c.a;
  r[1] = (d.M + d.argp) - (c.M + c.argp) + (d.raan - c.raan) * std::cos(c.i);
  r[2] = d.e * std::cos(d.argp) - c.e * std::cos(c.argp);
  r[3] = d.e * std::sin(d.argp) - c.e * std::sin(c.argp);
  r[4] = d.i - c.i;
  r[5] = (d.raan - c.raan) * std::sin(c.i);
  return r * c.a;
}

inline OrbitalElements deputy_of(const OrbitalElements& c, const Vec6& roe_m) {
  const Vec6 r = roe_m / c.a;
  OrbitalElements d;
  d.a = c.a * (1.0 + r[0]);
  d.i = c.i + r[4];
  d.raan = c.raan + r[5] / std::sin(c.i);
  const double ex = c.e * std::cos(c.argp) + r[2];
  const double ey = c.e * std::sin(c.argp) + r[3];
  d.e = std::hypot(ex, ey);
  d.argp = std::atan2(ey, ex);
  // keep argp on the same branch as the chief
  while (d.argp - c.argp > M_PI) d.argp -= 2.0 * M_PI;
  while (d.argp - c.argp < -M_PI) d.argp += 2.0 * M_PI;
  d.M = r[1] - (d.raan - c.raan) * std::cos(c.i) + c.M + c.argp - d.argp;
  return d;
}

/// Central-difference Jacobian of ROE(t1) w.r.t. ROE(t0) about the zero state.
inline Mat6 fd_stm(const OrbitalElements& oe0, double t1, double t0, const GravityModel& g, double h = 1e-3) {
  const OrbitalElements c0 = propagate_mean(oe0, t0, g);
  const OrbitalElements c1 = propagate_mean(oe0, t1, g);
  Mat6 j;
  for (int k = 0; k < 6; ++k) {
    Vec6 dp = Vec6::Zero(), dm = Vec6::Zero();
    dp[k] = h;
    dm[k] = -h;
    const Vec6 rp = roe_of(c1, propagate_mean(deputy_of(c0, dp), t1 - t0, g));
    const Vec6 rm = roe_of(c1, propagate_mean(deputy_of(c0, dm), t1 - t0, g));
    j.col(k) = (rp - rm) / (2.0 * h);
  }
  return j;
}

}  // namespace itg::oracle
