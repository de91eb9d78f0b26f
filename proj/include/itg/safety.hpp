#pragma once

// Chance-constrained passive safety. For a post-maneuver state x0 at control
// epoch t_j, every free-drift epoch t_j + tau_i must keep the RTN position
// outside the keep-out ellipsoid with confidence 1 - delta:
//
//   margin_i = 1 - x0' S_i x0 + q(delta) sqrt(g_i' Sigma_i g_i)  <= 0
//   S_i      = (Psi_i Phi_i)' P (Psi_i Phi_i)
//   g_i      = -2 Phi_i^{-T} S_i x0 = -2 Psi_i' P Psi_i Phi_i x0
//
// Sigma_i is propagated along the drift with process noise added per step.

#include "itg/astro.hpp"
#include "itg/uncertainty.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace itg {

using Vec9 = Eigen::Matrix<double, 9, 1>;

struct KeepOutZone {
  double r_koz = 30.0;                                         // m
  Vec3 semi_axes = Vec3::Constant(30.0);                       // m, RTN
  double delta_r_obs = 50.0;                                   // m

  static KeepOutZone sphere(double r, double delta_r_obs = 50.0) {
    KeepOutZone k;
    k.r_koz = r;
    k.semi_axes = Vec3::Constant(r);
    k.delta_r_obs = delta_r_obs;
    return k;
  }

  void validate() const {
    if (!(semi_axes.minCoeff() > 0.0) || !(r_koz > 0.0)) {
      throw std::domain_error("keep-out zone: semi-axes must be positive");
    }
    if (delta_r_obs < 0.0) throw std::domain_error("keep-out zone: delta_r_obs must be nonnegative");
  }
};

/// P acting on the RTN output of Psi; velocity rows are zero.
inline Mat6 shape_matrix(const KeepOutZone& koz) {
  Mat6 p = Mat6::Zero();
  for (int k = 0; k < 3; ++k) p(k, k) = 1.0 / (koz.semi_axes[k] * koz.semi_axes[k]);
  return p;
}

/// Drift offsets {0, step, 2 step, ...} up to tau_s, closed with tau_s itself.
inline std::vector<double> drift_grid(double tau_s, double step) {
  if (!(tau_s > 0.0) || !(step > 0.0)) throw std::domain_error("drift_grid: non-positive horizon or step");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double tau = k * step;
    if (tau > tau_s - 1e-9 * tau_s) break;
    grid.push_back(tau);
  }
  grid.push_back(tau_s);
  return grid;
}

/// Geometry of the drift arc from one control epoch; independent of the state
/// and reusable across SCP iterations.
struct DriftGeometry {
  double t_j = 0.0;
  std::vector<double> taus;
  std::vector<Mat6> phi_cum;   // Phi(t_j + tau_i, t_j)
  std::vector<Mat6> phi_step;  // Phi(t_j + tau_i, t_j + tau_{i-1}); identity at i = 0
  std::vector<Mat6> w;         // Psi_i' P Psi_i
  std::vector<Mat6> s;         // Phi_i' W_i Phi_i

  static DriftGeometry build(const OrbitalElements& oe, double t_j, const std::vector<double>& taus,
                             const KeepOutZone& koz, const GravityModel& g = kEarth) {
    DriftGeometry geo;
    geo.t_j = t_j;
    geo.taus = taus;
    const Mat6 p = shape_matrix(koz);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const double t = t_j + taus[i];
      const Mat6 phi = stm(oe, t, t_j, g);
      const Mat6 psi = roe_to_rtn_matrix(oe, t, g);
      geo.phi_cum.push_back(phi);
      geo.phi_step.push_back(i == 0 ? Mat6::Identity() : stm(oe, t, t_j + taus[i - 1], g));
      const Mat6 w = psi.transpose() * p * psi;
      geo.w.push_back(w);
      geo.s.push_back(phi.transpose() * w * phi);
    }
    return geo;
  }
};

struct DriftEpochEval {
  double tau = 0.0;
  double margin = 0.0;
  Vec6 gradient_x = Vec6::Zero();  // d margin / d x0 with Sigma held fixed
};

struct SafetyConstraintEval {
  std::vector<DriftEpochEval> epochs;
  double margin = 0.0;             // max over drift epochs
  Vec6 gradient_x = Vec6::Zero();  // gradient of the active epoch
  std::size_t worst_drift_step = 0;
};

/// Sigma_i along the drift arc, starting from Sigma_0 at tau = 0.
inline std::vector<Covariance6> drift_covariances(const DriftGeometry& geo, const Covariance6& sigma0,
                                                  const Mat6& q_process) {
  std::vector<Covariance6> out;
  out.reserve(geo.taus.size());
  Covariance6 sigma = sigma0;
  for (std::size_t i = 0; i < geo.taus.size(); ++i) {
    if (i > 0) sigma = propagate_covariance(sigma, geo.phi_step[i], q_process);
    out.push_back(sigma);
  }
  return out;
}

inline SafetyConstraintEval evaluate_drift(const DriftGeometry& geo, const Vec6& x0,
                                           const std::vector<Covariance6>& sigmas, double q) {
  SafetyConstraintEval out;
  out.epochs.reserve(geo.taus.size());
  for (std::size_t i = 0; i < geo.taus.size(); ++i) {
    const Vec6 sx = geo.s[i] * x0;
    const Vec6 gvec = -2.0 * geo.w[i] * (geo.phi_cum[i] * x0);
    const Vec6 sig_g = sigmas[i] * gvec;
    const double var = std::max(0.0, gvec.dot(sig_g));
    const double sd = std::sqrt(var);
    DriftEpochEval e;
    e.tau = geo.taus[i];
    e.margin = 1.0 - x0.dot(sx) + q * sd;
    e.gradient_x = -2.0 * sx;
    if (sd > 0.0) {
      // d sqrt(g' Sigma g)/d x0 = (dg/dx0)' Sigma g / sd, dg/dx0 = -2 W Phi
      e.gradient_x += q * (-2.0 * geo.phi_cum[i].transpose() * (geo.w[i] * sig_g)) / sd;
    }
    out.epochs.push_back(e);
  }
  auto worst = std::max_element(out.epochs.begin(), out.epochs.end(),
                                [](const auto& a, const auto& b) { return a.margin < b.margin; });
  out.worst_drift_step = static_cast<std::size_t>(worst - out.epochs.begin());
  out.margin = worst->margin;
  out.gradient_x = worst->gradient_x;
  return out;
}

inline SafetyConstraintEval drift_constraint_margin(const RoeState& x_post, const Covariance6& sigma0,
                                                    const KeepOutZone& koz, double delta,
                                                    const std::vector<double>& drift_taus,
                                                    const OrbitalElements& oe, double t_j,
                                                    const Mat6& q_process,
                                                    const GravityModel& g = kEarth) {
  const DriftGeometry geo = DriftGeometry::build(oe, t_j, drift_taus, koz, g);
  return evaluate_drift(geo, x_post.v, drift_covariances(geo, sigma0, q_process), risk_quantile(delta));
}

/// One affine safety row over z = (x_j, u_j): margin_i ~= a . z + b.
struct AffineRow {
  Vec9 a = Vec9::Zero();
  double b = 0.0;
};

/// What the affine rows hold fixed at the reference.
///  FrozenUncertainty: the whole term q sqrt(g' Sigma g); only 1 - x0' S x0 is expanded.
///  FrozenCovariance:  Sigma only; g(x0) stays live.
///  Full:              nothing; Sigma_0 is differentiated through rho(x_j) and the Gates model.
enum class Linearization { FrozenUncertainty, FrozenCovariance, Full };

namespace detail {

// Gradient in u of w' Sigma_exe(u) w.
inline Vec3 gates_quadratic_gradient(const Vec3& w, const Impulse& u, const UncertaintyConfig& cfg) {
  const Vec3& v = u.dv;
  const double wu = w.dot(v);
  const double a2 = cfg.gates_mag_frac * cfg.gates_mag_frac;
  const double p2 = cfg.gates_point_sigma * cfg.gates_point_sigma;
  // w'Sw = f2 |w|^2 + a2 (w.u)^2 + p2 (|u|^2 |w|^2 - (w.u)^2)
  return 2.0 * a2 * wu * w + p2 * (2.0 * w.squaredNorm() * v - 2.0 * wu * w);
}

}  // namespace detail

/// Linearizes every drift-epoch margin at (x_ref, u_ref) over z = (x_j, u_j).
inline std::vector<AffineRow> linearize_margin(const DriftGeometry& geo, const RoeState& x_ref,
                                               const Impulse& u_ref, const OrbitalElements& oe,
                                               const UncertaintyConfig& cfg,
                                               Linearization mode = Linearization::FrozenCovariance,
                                               const GravityModel& g = kEarth) {
  const Mat63 gam = control_input_matrix(oe, geo.t_j, g);
  const Vec6 x0 = x_ref.v + gam * u_ref.dv;
  const Covariance6 sigma0 = initial_dispersion(x_ref, u_ref, oe, geo.t_j, cfg, g);
  const double q = risk_quantile(cfg.delta_risk);
  const SafetyConstraintEval ev = evaluate_drift(geo, x0, drift_covariances(geo, sigma0, cfg.q_process), q);

  const bool full = mode == Linearization::Full;
  const Vec6 s_nav = nav_sigma_per_meter(cfg.beta);
  Vec6 drho = Vec6::Zero();  // gradient of the range at x_ref
  std::vector<Covariance6> sig;
  if (full) {
    const auto pos = roe_to_rtn_matrix(oe, geo.t_j, g).topRows<3>();
    const Vec3 r = pos * x_ref.v;
    if (r.norm() > 0.0) drho = pos.transpose() * r.normalized();
    sig = drift_covariances(geo, sigma0, cfg.q_process);
  }

  Vec9 z_ref;
  z_ref << x_ref.v, u_ref.dv;
  std::vector<AffineRow> rows;
  rows.reserve(ev.epochs.size());
  for (std::size_t i = 0; i < ev.epochs.size(); ++i) {
    AffineRow r;
    const Vec6 gx = mode == Linearization::FrozenUncertainty ? Vec6(-2.0 * (geo.s[i] * x0))
                                                              : ev.epochs[i].gradient_x;
    r.a.head<6>() = gx;
    r.a.tail<3>() = gam.transpose() * gx;
    if (full) {
      // d/dz of q sqrt(h' Sigma_0 h) through rho(x) and Sigma_exe(u), h = Phi' g
      const Vec6 gvec = -2.0 * geo.w[i] * (geo.phi_cum[i] * x0);
      const double var = gvec.dot(sig[i] * gvec);
      if (var > 0.0) {
        const Vec6 h = geo.phi_cum[i].transpose() * gvec;
        const double c = q / (2.0 * std::sqrt(var));
        const double sh = s_nav.dot(h);
        r.a.head<6>() += c * sh * sh * drho;
        r.a.tail<3>() += c * detail::gates_quadratic_gradient(gam.transpose() * h, u_ref, cfg);
      }
    }
    r.b = ev.epochs[i].margin - r.a.dot(z_ref);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<AffineRow> linearize_margin(const RoeState& x_ref, const Impulse& u_ref,
                                               const KeepOutZone& koz, const std::vector<double>& drift_taus,
                                               const OrbitalElements& oe, double t_j,
                                               const UncertaintyConfig& cfg,
                                               Linearization mode = Linearization::FrozenCovariance,
                                               const GravityModel& g = kEarth) {
  return linearize_margin(DriftGeometry::build(oe, t_j, drift_taus, koz, g), x_ref, u_ref, oe, cfg, mode, g);
}

}  // namespace itg
