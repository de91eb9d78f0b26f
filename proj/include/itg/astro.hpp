#pragma once

// Relative orbital dynamics in quasi-nonsingular relative orbital elements
// (qnsROE), meter-scaled by the chief semi-major axis.
//
//   d_a      = a_c * (a_d - a_c) / a_c
//   d_lambda = a_c * [(u_d - u_c) + (raan_d - raan_c) cos i_c]
//   d_ex/ey  = a_c * (e_d - e_c) in (cos w, sin w)
//   d_ix     = a_c * (i_d - i_c)
//   d_iy     = a_c * (raan_d - raan_c) sin i_c
//
// with u the mean argument of latitude. The chief is propagated with the
// secular J2 drift of (raan, argp, M) only.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace itg {

using Vec3 = Eigen::Matrix<double, 3, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix<double, 3, 3>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

struct GravityModel {
  double mu = 3.986004418e14;   // m^3/s^2
  double j2 = 1.08263e-3;
  double r_earth = 6.378137e6;  // m
};

inline constexpr GravityModel kEarth{};

struct OrbitalElements {
  double a = 0.0;     // m
  double e = 0.0;
  double i = 0.0;     // rad
  double raan = 0.0;  // rad
  double argp = 0.0;  // rad
  double M = 0.0;     // rad

  void validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw std::domain_error("orbital elements: semi-major axis must be positive, got " +
                              std::to_string(a));
    }
    if (!(e >= 0.0 && e < 1.0)) {
      throw std::domain_error("orbital elements: eccentricity must be in [0,1), got " +
                              std::to_string(e));
    }
    if (!std::isfinite(i) || !std::isfinite(raan) || !std::isfinite(argp) || !std::isfinite(M)) {
      throw std::domain_error("orbital elements: angles must be finite");
    }
  }
};

/// Chief elements of the reference inspection orbit (M is varied per scenario).
inline OrbitalElements reference_chief(double mean_anomaly = 0.0) {
  constexpr double deg = std::numbers::pi / 180.0;
  return {6.73814e6, 5.581e-4, 51.64 * deg, 301.04 * deg, 26.18 * deg, mean_anomaly};
}

struct RoeState {
  Vec6 v = Vec6::Zero();

  RoeState() = default;
  explicit RoeState(const Vec6& x) : v(x) {}
  RoeState(double d_a, double d_lambda, double d_ex, double d_ey, double d_ix, double d_iy) {
    v << d_a, d_lambda, d_ex, d_ey, d_ix, d_iy;
  }

  double d_a() const { return v[0]; }
  double d_lambda() const { return v[1]; }
  double d_ex() const { return v[2]; }
  double d_ey() const { return v[3]; }
  double d_ix() const { return v[4]; }
  double d_iy() const { return v[5]; }

  bool finite() const { return v.allFinite(); }
};

struct RtnState {
  Vec3 r = Vec3::Zero();  // m
  Vec3 v = Vec3::Zero();  // m/s
};

struct Impulse {
  Vec3 dv = Vec3::Zero();  // RTN, m/s

  Impulse() = default;
  explicit Impulse(const Vec3& x) : dv(x) {}
  Impulse(double r, double t, double n) : dv(r, t, n) {}

  double norm() const { return dv.norm(); }
};

inline double mean_motion(const OrbitalElements& oe, const GravityModel& g = kEarth) {
  if (!(oe.a > 0.0)) throw std::domain_error("mean_motion: non-positive semi-major axis");
  return std::sqrt(g.mu / (oe.a * oe.a * oe.a));
}

inline double orbital_period(const OrbitalElements& oe, const GravityModel& g = kEarth) {
  return 2.0 * std::numbers::pi / mean_motion(oe, g);
}

/// Secular J2 rates of the chief. kappa follows the usual
/// 3/4 J2 R^2 sqrt(mu) / (a^{7/2} eta^4) grouping.
struct SecularRates {
  double n = 0.0;
  double kappa = 0.0;
  double eta = 1.0;
  double raan_dot = 0.0;
  double argp_dot = 0.0;
  double M_dot = 0.0;
};

inline SecularRates secular_rates(const OrbitalElements& oe, const GravityModel& g = kEarth) {
  SecularRates r;
  r.n = mean_motion(oe, g);
  r.eta = std::sqrt(1.0 - oe.e * oe.e);
  r.kappa = 0.75 * g.j2 * g.r_earth * g.r_earth * std::sqrt(g.mu) /
            (std::pow(oe.a, 3.5) * std::pow(r.eta, 4));
  const double c = std::cos(oe.i);
  const double P = 3.0 * c * c - 1.0;
  const double Q = 5.0 * c * c - 1.0;
  r.raan_dot = -2.0 * r.kappa * c;
  r.argp_dot = r.kappa * Q;
  r.M_dot = r.n + r.kappa * r.eta * P;
  return r;
}

/// Chief mean elements at epoch t (s past the element epoch).
inline OrbitalElements chief_at(const OrbitalElements& oe, double t, const GravityModel& g = kEarth) {
  const SecularRates r = secular_rates(oe, g);
  OrbitalElements out = oe;
  out.raan += r.raan_dot * t;
  out.argp += r.argp_dot * t;
  out.M += r.M_dot * t;
  return out;
}

inline double mean_arg_latitude(const OrbitalElements& oe, double t, const GravityModel& g = kEarth) {
  const OrbitalElements c = chief_at(oe, t, g);
  return c.argp + c.M;
}

/// qnsROE state transition matrix with secular J2 (closed-form,
/// quasi-nonsingular form). It is the exact Jacobian of the secular mean-element
/// flow, so it composes to round-off.
inline Mat6 stm(const OrbitalElements& oe, double t1, double t0, const GravityModel& g = kEarth) {
  oe.validate();
  if (t1 < t0) throw std::domain_error("stm: t1 < t0");
  const double tau = t1 - t0;
  const OrbitalElements ci = chief_at(oe, t0, g);
  const SecularRates r = secular_rates(oe, g);

  const double k = r.kappa;
  const double eta = r.eta;
  const double E = 1.0 + eta;
  const double F = 4.0 + 3.0 * eta;
  const double G = 1.0 / (eta * eta);
  const double ci2 = std::cos(oe.i) * std::cos(oe.i);
  const double P = 3.0 * ci2 - 1.0;
  const double Q = 5.0 * ci2 - 1.0;
  const double S = std::sin(2.0 * oe.i);
  const double T = std::sin(oe.i) * std::sin(oe.i);

  const double w_i = ci.argp;
  const double w_f = w_i + r.argp_dot * tau;
  const double exi = oe.e * std::cos(w_i), eyi = oe.e * std::sin(w_i);
  const double exf = oe.e * std::cos(w_f), eyf = oe.e * std::sin(w_f);
  const double cw = std::cos(r.argp_dot * tau), sw = std::sin(r.argp_dot * tau);

  Mat6 phi = Mat6::Identity();
  phi(1, 0) = -(1.5 * r.n + 3.5 * k * E * P) * tau;
  phi(1, 2) = k * exi * F * G * P * tau;
  phi(1, 3) = k * eyi * F * G * P * tau;
  phi(1, 4) = -k * F * S * tau;

  phi(2, 0) = 3.5 * k * eyf * Q * tau;
  phi(2, 2) = cw - 4.0 * k * exi * eyf * G * Q * tau;
  phi(2, 3) = -sw - 4.0 * k * eyi * eyf * G * Q * tau;
  phi(2, 4) = 5.0 * k * eyf * S * tau;

  phi(3, 0) = -3.5 * k * exf * Q * tau;
  phi(3, 2) = sw + 4.0 * k * exi * exf * G * Q * tau;
  phi(3, 3) = cw + 4.0 * k * eyi * exf * G * Q * tau;
  phi(3, 4) = -5.0 * k * exf * S * tau;

  phi(5, 0) = 3.5 * k * S * tau;
  phi(5, 2) = -4.0 * k * exi * G * S * tau;
  phi(5, 3) = -4.0 * k * eyi * G * S * tau;
  phi(5, 4) = 2.0 * k * T * tau;
  return phi;
}

/// Impulsive control input matrix (near-circular Gauss variational equations),
/// meter-scaled: maps an RTN delta-v [m/s] to a qnsROE jump [m].
inline Mat63 control_input_matrix(const OrbitalElements& oe, double t, const GravityModel& g = kEarth) {
  oe.validate();
  const double n = mean_motion(oe, g);
  const double u = mean_arg_latitude(oe, t, g);
  const double su = std::sin(u), cu = std::cos(u);
  Mat63 gam;
  // clang-format off
  gam <<  0.0, 2.0,      0.0,
         -2.0, 0.0,      0.0,
           su, 2.0 * cu, 0.0,
          -cu, 2.0 * su, 0.0,
          0.0, 0.0,      cu,
          0.0, 0.0,      su;
  // clang-format on
  return gam / n;
}

/// First-order qnsROE -> RTN position/velocity map Psi(t) for near-circular
/// chief orbits. Rows: r_R, r_T, r_N, v_R, v_T, v_N.
inline Mat6 roe_to_rtn_matrix(const OrbitalElements& oe, double t, const GravityModel& g = kEarth) {
  oe.validate();
  const double n = mean_motion(oe, g);
  const double u = mean_arg_latitude(oe, t, g);
  const double su = std::sin(u), cu = std::cos(u);
  Mat6 psi;
  // clang-format off
  psi << 1.0,      0.0, -cu,           -su,           0.0,     0.0,
         0.0,      1.0,  2.0 * su,     -2.0 * cu,     0.0,     0.0,
         0.0,      0.0,  0.0,           0.0,          su,     -cu,
         0.0,      0.0,  n * su,       -n * cu,       0.0,     0.0,
        -1.5 * n,  0.0,  2.0 * n * cu,  2.0 * n * su, 0.0,     0.0,
         0.0,      0.0,  0.0,           0.0,          n * cu,  n * su;
  // clang-format on
  return psi;
}

inline RtnState roe_to_rtn(const RoeState& x, const OrbitalElements& oe, double t,
                           const GravityModel& g = kEarth) {
  const Vec6 y = roe_to_rtn_matrix(oe, t, g) * x.v;
  return {y.head<3>(), y.tail<3>()};
}

inline double range(const RoeState& x, const OrbitalElements& oe, double t,
                    const GravityModel& g = kEarth) {
  return roe_to_rtn(x, oe, t, g).r.norm();
}

inline RoeState propagate(const RoeState& x, const Impulse& u, const OrbitalElements& oe, double t0,
                          double t1, const GravityModel& g = kEarth) {
  return RoeState(stm(oe, t1, t0, g) * (x.v + control_input_matrix(oe, t0, g) * u.dv));
}

}  // namespace itg
