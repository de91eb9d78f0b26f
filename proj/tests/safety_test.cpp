#include "itg/safety.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace itg {
namespace {

const OrbitalElements kOe = reference_chief(0.7);

std::vector<double> ten_epochs() {
  std::vector<double> g;
  const double T = orbital_period(kOe);
  for (int i = 0; i < 10; ++i) g.push_back(i * T / 9.0);
  return g;
}

// Direct geometry: propagate, map to RTN, test the ellipsoid.
double ellipsoid_value(const Vec6& x0, const KeepOutZone& koz, double t_j, double tau) {
  const Vec6 x = stm(kOe, t_j + tau, t_j) * x0;
  const Vec3 r = roe_to_rtn(RoeState(x), kOe, t_j + tau).r;
  return r.cwiseQuotient(koz.semi_axes).squaredNorm();
}

Vec6 random_state(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec6 x;
  for (int k = 0; k < 6; ++k) x[k] = u(rng);
  x[0] *= 0.05;  // keep the drift small relative to the arc
  return x;
}

TEST(ShapeMatrix, Sphere) {
  const Mat6 p = shape_matrix(KeepOutZone::sphere(30.0));
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p(k, k), 1.0 / 900.0);
  EXPECT_TRUE((p.bottomRightCorner<3, 3>().isZero()));
}

TEST(DriftGrid, ClosesWithHorizon) {
  const auto g = drift_grid(1000.0, 300.0);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.front(), 0.0);
  EXPECT_DOUBLE_EQ(g.back(), 1000.0);
  EXPECT_THROW(drift_grid(0.0, 1.0), std::domain_error);
}

TEST(DriftMargin, VBarHundredMeters) {
  // Position 100 m along-track at tau = 0: only d_lambda contributes.
  const RoeState x(0, 100, 0, 0, 0, 0);
  const auto ev = drift_constraint_margin(x, Covariance6::Zero(), KeepOutZone::sphere(30.0), 0.01, {0.0},
                                          kOe, 0.0, Mat6::Zero());
  EXPECT_NEAR(ev.epochs[0].margin, 1.0 - (100.0 / 30.0) * (100.0 / 30.0), 1e-12);
  EXPECT_NEAR(ev.margin, -10.1111111111, 1e-9);
}

TEST(DriftMargin, BoundaryIsZero) {
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  const double t_j = 1234.0;
  const double tau = 2100.0;
  // Pick a direction, then scale so the position at t_j + tau sits on the sphere.
  const Vec6 dir(0.0, 40.0, 0.0, 25.0, 0.0, 25.0);
  const double s = 1.0 / std::sqrt(ellipsoid_value(dir, koz, t_j, tau));
  const auto ev = drift_constraint_margin(RoeState(s * dir), Covariance6::Zero(), koz, 0.01, {0.0, tau},
                                          kOe, t_j, Mat6::Zero());
  EXPECT_NEAR(ev.epochs[1].margin, 0.0, 1e-12);
}

TEST(DriftMargin, CovarianceInflationNeverDecreases) {
  std::mt19937_64 rng(3);
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  const auto taus = drift_grid(orbital_period(kOe), 600.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec6 x = random_state(rng, 80.0);
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Random();
    const Covariance6 s0 = a * a.transpose();
    const Covariance6 extra = 0.3 * Covariance6::Identity();
    const auto lo = drift_constraint_margin(RoeState(x), s0, koz, 0.01, taus, kOe, 0.0, 1e-4 * Mat6::Identity());
    const auto hi =
        drift_constraint_margin(RoeState(x), s0 + extra, koz, 0.01, taus, kOe, 0.0, 1e-4 * Mat6::Identity());
    for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_GE(hi.epochs[i].margin, lo.epochs[i].margin - 1e-14);
  }
}

TEST(DriftMargin, GradientDirectionMatchesInverseForm) {
  // g = -2 Phi^-T S x0 computed with an explicit inverse.
  const KeepOutZone koz = KeepOutZone::sphere(25.0);
  const auto taus = drift_grid(orbital_period(kOe), 900.0);
  const DriftGeometry geo = DriftGeometry::build(kOe, 500.0, taus, koz);
  const Vec6 x(1.0, 60.0, -10.0, 40.0, 5.0, 35.0);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const Vec6 g_inv = -2.0 * geo.phi_cum[i].transpose().inverse() * (geo.s[i] * x);
    const Vec6 g_dir = -2.0 * geo.w[i] * (geo.phi_cum[i] * x);
    EXPECT_LT((g_inv - g_dir).norm(), 1e-10 * g_dir.norm());
  }
}

TEST(DriftMargin, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  const auto taus = drift_grid(orbital_period(kOe), 900.0);
  const DriftGeometry geo = DriftGeometry::build(kOe, 0.0, taus, koz);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec6 x = random_state(rng, 100.0);
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Random();
    const auto sig = drift_covariances(geo, 4.0 * a * a.transpose(), 1e-4 * Mat6::Identity());
    const double q = risk_quantile(0.01);
    const auto ev = evaluate_drift(geo, x, sig, q);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const Vec6 gr = ev.epochs[i].gradient_x;
      for (int k = 0; k < 6; ++k) {
        const double h = 1e-4;
        Vec6 xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const double fd = (evaluate_drift(geo, xp, sig, q).epochs[i].margin -
                           evaluate_drift(geo, xm, sig, q).epochs[i].margin) /
                          (2.0 * h);
        EXPECT_NEAR(gr[k], fd, 1e-4 * std::max(1.0, gr.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST(LinearizeMargin, AnchorsAtReference) {
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  UncertaintyConfig cfg;
  const auto taus = drift_grid(cfg.tau_s, cfg.drift_step);
  const double t_j = 2700.0;
  const RoeState xr(0.5, 80.0, 3.0, 45.0, -2.0, 45.0);
  const Impulse ur(0.01, -0.02, 0.005);
  const auto rows = linearize_margin(xr, ur, koz, taus, kOe, t_j, cfg);
  const Vec6 x0 = xr.v + control_input_matrix(kOe, t_j) * ur.dv;
  const auto ev = drift_constraint_margin(RoeState(x0), initial_dispersion(xr, ur, kOe, t_j, cfg), koz,
                                          cfg.delta_risk, taus, kOe, t_j, cfg.q_process);
  Vec9 z;
  z << xr.v, ur.dv;
  ASSERT_EQ(rows.size(), taus.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].a.dot(z) + rows[i].b, ev.epochs[i].margin, 1e-10 * std::max(1.0, std::abs(ev.epochs[i].margin)));
  }
}

TEST(LinearizeMargin, DirectionalDerivativeWithFrozenUncertainty) {
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  UncertaintyConfig cfg;
  const auto taus = drift_grid(cfg.tau_s, cfg.drift_step);
  const double t_j = 900.0;
  const RoeState xr(0.0, -120.0, 0.0, 40.0, 0.0, 40.0);
  const Impulse ur(0.0, 0.02, 0.0);
  const auto rows = linearize_margin(xr, ur, koz, taus, kOe, t_j, cfg, Linearization::FrozenUncertainty);
  const DriftGeometry geo = DriftGeometry::build(kOe, t_j, taus, koz);
  const Mat63 gam = control_input_matrix(kOe, t_j);
  // Oracle: 1 - x0' S x0 along the direction, plus the reference uncertainty term.
  auto quad = [&](std::size_t i, const Vec9& z) {
    const Vec6 x0 = z.head<6>() + gam * z.tail<3>();
    return 1.0 - x0.dot(geo.s[i] * x0);
  };
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const Vec9 z0 = (Vec9() << xr.v, ur.dv).finished();
  for (int trial = 0; trial < 20; ++trial) {
    Vec9 d;
    for (int k = 0; k < 9; ++k) d[k] = nd(rng) * (k < 6 ? 1.0 : 1e-3);
    const double h = 1e-3;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double fd = (quad(i, z0 + h * d) - quad(i, z0 - h * d)) / (2.0 * h);
      EXPECT_NEAR(rows[i].a.dot(d), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

// Central differences of the nonlinear margin along random directions in z.
// With Sigma held at the reference the oracle is the margin with fixed
// drift covariances; the full mode must match the true margin.
void check_directional_derivative(Linearization mode) {
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  UncertaintyConfig cfg;
  cfg.beta = 2.0;
  const auto taus = drift_grid(cfg.tau_s, cfg.drift_step);
  const double t_j = 1800.0;
  const RoeState xr(0.3, -60.0, 1.0, 25.0, -0.5, 25.0);
  const Impulse ur(0.004, 0.015, -0.003);
  const auto rows = linearize_margin(xr, ur, koz, taus, kOe, t_j, cfg, mode);
  const DriftGeometry geo = DriftGeometry::build(kOe, t_j, taus, koz);
  const Mat63 gam = control_input_matrix(kOe, t_j);
  const double q = risk_quantile(cfg.delta_risk);
  const auto sig_ref = drift_covariances(geo, initial_dispersion(xr, ur, kOe, t_j, cfg), cfg.q_process);
  auto margin = [&](std::size_t i, const Vec9& z) {
    const RoeState x(Vec6(z.head<6>()));
    const Impulse u(Vec3(z.tail<3>()));
    const auto sig = mode == Linearization::Full
                         ? drift_covariances(geo, initial_dispersion(x, u, kOe, t_j, cfg), cfg.q_process)
                         : sig_ref;
    return evaluate_drift(geo, x.v + gam * u.dv, sig, q).epochs[i].margin;
  };
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  const Vec9 z0 = (Vec9() << xr.v, ur.dv).finished();
  for (int trial = 0; trial < 10; ++trial) {
    Vec9 d;
    for (int k = 0; k < 9; ++k) d[k] = nd(rng) * (k < 6 ? 1.0 : 1e-3);
    const double h = 1e-3;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double fd = (margin(i, z0 + h * d) - margin(i, z0 - h * d)) / (2.0 * h);
      EXPECT_NEAR(rows[i].a.dot(d), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "epoch " << i;
    }
  }
}

TEST(LinearizeMargin, DirectionalDerivativeWithFrozenCovariance) {
  check_directional_derivative(Linearization::FrozenCovariance);
}

TEST(LinearizeMargin, DirectionalDerivativeFull) { check_directional_derivative(Linearization::Full); }

TEST(LinearizeMargin, OverApproximatesConcaveMargin) {
  // Sigma_0 = 0 with no process noise: margin is 1 - x'Sx, concave in x.
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  const auto taus = drift_grid(orbital_period(kOe), 900.0);
  const DriftGeometry geo = DriftGeometry::build(kOe, 0.0, taus, koz);
  const std::vector<Covariance6> zero(taus.size(), Covariance6::Zero());
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec6 xr = random_state(rng, 100.0);
    const Vec6 x = random_state(rng, 100.0);
    const auto er = evaluate_drift(geo, xr, zero, 2.0);
    const auto ex = evaluate_drift(geo, x, zero, 2.0);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const double affine = er.epochs[i].margin + er.epochs[i].gradient_x.dot(x - xr);
      EXPECT_GE(affine, ex.epochs[i].margin - 1e-9);
    }
  }
}

TEST(SafetyOracle, DeterministicFeasibilityMatchesGeometry) {
  KeepOutZone koz;
  koz.r_koz = 30.0;
  koz.semi_axes = Vec3(25.0, 40.0, 30.0);
  const auto taus = ten_epochs();
  const double t_j = 3100.0;
  std::mt19937_64 rng(2024);
  int disagreements = 0;
  int infeasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec6 x = random_state(rng, 90.0);
    const auto ev = drift_constraint_margin(RoeState(x), Covariance6::Zero(), koz, 0.01, taus, kOe, t_j,
                                            Mat6::Zero());
    bool geo_ok = true;
    for (double tau : taus) geo_ok = geo_ok && ellipsoid_value(x, koz, t_j, tau) >= 1.0;
    const bool margin_ok = ev.margin <= 0.0;
    disagreements += geo_ok != margin_ok;
    infeasible += !geo_ok;
  }
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(infeasible, 50);  // both outcomes exercised
  EXPECT_LT(infeasible, 950);
}

TEST(SafetyOracle, MonteCarloViolationWithinRisk) {
  const double delta = 0.05;
  const KeepOutZone koz = KeepOutZone::sphere(30.0);
  const auto taus = ten_epochs();
  const double t_j = 0.0;
  Covariance6 s0 = Covariance6::Zero();
  s0.diagonal() << 1.0, 16.0, 9.0, 9.0, 9.0, 9.0;
  s0(1, 3) = s0(3, 1) = 4.0;
  // Push a state along a ray until the chance constraint is just active.
  const Vec6 dir(0.0, 10.0, 0.0, 8.0, 0.0, 8.0);
  auto margin = [&](double s) {
    return drift_constraint_margin(RoeState(s * dir), s0, koz, delta, taus, kOe, t_j, Mat6::Zero()).margin;
  };
  double lo = 1.0, hi = 50.0;
  ASSERT_GT(margin(lo), 0.0);
  ASSERT_LT(margin(hi), 0.0);
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (margin(mid) > 0.0 ? lo : hi) = mid;
  }
  const Vec6 x = hi * dir;
  ASSERT_LE(margin(hi), 0.0);

  const Eigen::LLT<Covariance6> llt(s0);
  const Mat6 L = llt.matrixL();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  const int n = 10000;
  std::vector<int> violations(taus.size(), 0);
  for (int k = 0; k < n; ++k) {
    Vec6 w;
    for (int c = 0; c < 6; ++c) w[c] = nd(rng);
    const Vec6 xs = x + L * w;
    for (std::size_t i = 0; i < taus.size(); ++i) violations[i] += ellipsoid_value(xs, koz, t_j, taus[i]) < 1.0;
  }
  const double bound = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n);
  int worst = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    EXPECT_LE(violations[i] / double(n), bound) << "epoch " << i;
    worst = std::max(worst, violations[i]);
  }
  EXPECT_GT(worst, 0);  // the constraint is active somewhere
}

}  // namespace
}  // namespace itg
