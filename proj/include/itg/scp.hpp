#pragma once

// Multi-phase minimum-fuel trajectory optimization by sequential convex
// programming. Each phase is the impulse sequence between two fixed states
// (start, waypoint); states are eliminated through the linear dynamics, so the
// convex subproblem has impulses, their norm epigraphs and safety slacks only.

#include "itg/astro.hpp"
#include "itg/plan.hpp"
#include "itg/safety.hpp"
#include "itg/socp.hpp"
#include "itg/uncertainty.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace itg {

struct ScpSettings {
  int max_iters = 20;
  double trust_radius_x = 200.0;   // m, on states with linearized safety rows
  double trust_radius_u = 0.02;    // m/s, per impulse component
  double trust_radius_max = 0.1;   // m/s
  double conv_tol_state = 0.1;     // m
  double conv_tol_cost = 1e-4;     // relative
  double slack_penalty = 1e3;
  double feas_tol = 1e-6;
  double margin_buffer = 1e-2;     // subproblem rows require margin <= -margin_buffer
  double reject_ratio = 0.1;
  double expand_ratio = 0.9;
  Linearization linearization = Linearization::FrozenCovariance;

  void validate() const {
    if (max_iters < 1) throw std::domain_error("scp: max_iters must be >= 1");
    for (double v : {trust_radius_x, trust_radius_u, trust_radius_max, conv_tol_state, conv_tol_cost,
                     slack_penalty, feas_tol}) {
      if (!(v > 0.0)) throw std::domain_error("scp: settings must be positive");
    }
    if (margin_buffer < 0.0) throw std::domain_error("scp: margin_buffer must be nonnegative");
  }
};

struct PhaseProblem {
  RoeState x_start;
  RoeState x_end;
  int n_steps = 1;
  double t_start = 0.0;
  double dt = 900.0;
  KeepOutZone koz;
  UncertaintyConfig uncertainty;
  OrbitalElements oe;
  bool safety = true;
  GravityModel gravity = kEarth;

  void validate() const {
    if (n_steps < 1) throw std::domain_error("phase: n_steps must be >= 1");
    if (!(dt > 0.0)) throw std::domain_error("phase: dt must be positive");
    if (!x_start.finite() || !x_end.finite()) throw std::domain_error("phase: non-finite boundary state");
    oe.validate();
    koz.validate();
    uncertainty.validate();
  }
};

enum class ScpStatus { Converged, MaxIters, SubproblemInfeasible };

inline const char* to_string(ScpStatus s) {
  switch (s) {
    case ScpStatus::Converged: return "converged";
    case ScpStatus::MaxIters: return "max_iters";
    case ScpStatus::SubproblemInfeasible: return "subproblem_infeasible";
  }
  return "unknown";
}

struct ScpIteration {
  double merit = 0.0;         // fuel + penalty * sum of positive nonlinear margins
  double fuel = 0.0;
  double max_margin = 0.0;
  double trust_radius = 0.0;
  double ratio = 0.0;
  int safety_rows = 0;
  bool accepted = false;
};

struct Trajectory {
  std::vector<RoeState> states;    // one per grid epoch
  std::vector<Impulse> impulses;   // one per control epoch: states.size() - 1
  std::vector<double> epochs;      // s
  ScpStatus status = ScpStatus::MaxIters;
  double fuel = 0.0;               // sum |u_j|, m/s
  int iterations = 0;
  double max_margin = -std::numeric_limits<double>::infinity();
  int failed_phase = -1;
  std::vector<ScpStatus> phase_status;
  std::vector<ScpIteration> history;

  bool converged() const { return status == ScpStatus::Converged; }
};

/// Affine map from the stacked impulse vector (3n) to every state of a phase:
/// x_j = drift_j + B_j u.
struct StateMap {
  int n_steps = 0;
  std::vector<Vec6> drift;        // free drift of x_start, j = 0..n
  Eigen::MatrixXd B;              // 6(n+1) x 3n
  std::vector<Mat63> gamma;       // control matrix at each control epoch
  std::vector<Mat6> phi;          // step STMs Phi(t_{j+1}, t_j)

  Vec6 state(int j, const Eigen::VectorXd& u) const {
    return drift[j] + B.middleRows(6 * j, 6) * u;
  }
  Eigen::MatrixXd terminal_rows() const { return B.bottomRows(6); }
};

inline StateMap eliminate_states(const PhaseProblem& ph) {
  ph.validate();
  const int n = ph.n_steps;
  StateMap m;
  m.n_steps = n;
  m.B = Eigen::MatrixXd::Zero(6 * (n + 1), 3 * n);
  m.drift.push_back(ph.x_start.v);
  for (int j = 0; j < n; ++j) {
    const double tj = ph.t_start + j * ph.dt;
    const Mat6 phi = stm(ph.oe, tj + ph.dt, tj, ph.gravity);
    const Mat63 gam = control_input_matrix(ph.oe, tj, ph.gravity);
    m.phi.push_back(phi);
    m.gamma.push_back(gam);
    m.drift.push_back(phi * m.drift.back());
    m.B.block(6 * (j + 1), 0, 6, 3 * j) = phi * m.B.block(6 * j, 0, 6, 3 * j);
    m.B.block(6 * (j + 1), 3 * j, 6, 3) = phi * gam;
  }
  return m;
}

/// Convex subproblem over impulses u (3n):
///   min  sum_j |u_j| + penalty * sum_g slack_g
///   s.t. E u = f,  a_r . u <= b_r + slack_{g(r)},  slack >= 0,  |u - u_ref|_inf <= radius
///        |C_k (u - u_ref)|_inf <= radius_x  for the optional state rows C.
/// Rows share a slack through slack_group (one slack per row when empty).
struct Subproblem {
  int n_impulses = 0;
  Eigen::MatrixXd eq_a;
  Eigen::VectorXd eq_b;
  Eigen::MatrixXd ineq_a;
  Eigen::VectorXd ineq_b;
  std::vector<int> slack_group;
  Eigen::MatrixXd state_rows;        // optional trust-region rows on states
  double state_radius = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u_ref;
  double trust_radius = std::numeric_limits<double>::infinity();
  double slack_penalty = 1e3;
};

struct SubproblemResult {
  bool ok = false;
  Eigen::VectorXd u;
  Eigen::VectorXd slack;
  double fuel = 0.0;
  double cost = 0.0;  // fuel + penalty * sum slack
  double kkt_residual = std::numeric_limits<double>::infinity();
  int ipm_iterations = 0;
};

inline double impulse_norm_sum(const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int j = 0; j < u.size() / 3; ++j) s += u.segment<3>(3 * j).norm();
  return s;
}

inline SubproblemResult solve_socp_subproblem(const Subproblem& sp,
                                              const socp::Settings& ipm = socp::Settings{}) {
  constexpr double u_scale = 1e-2;  // decision variables in cm/s
  const int n = sp.n_impulses;
  const int nu = 3 * n;
  const int mr = static_cast<int>(sp.ineq_a.rows());
  std::vector<int> group = sp.slack_group;
  if (group.empty()) {
    for (int r = 0; r < mr; ++r) group.push_back(r);
  }
  if (static_cast<int>(group.size()) != mr) throw std::invalid_argument("subproblem: slack_group size mismatch");
  const int ng = mr > 0 ? *std::max_element(group.begin(), group.end()) + 1 : 0;
  const int nvar = nu + n + ng;
  const bool box = std::isfinite(sp.trust_radius);
  const bool sbox = std::isfinite(sp.state_radius) && sp.state_rows.rows() > 0;
  const int ms = sbox ? static_cast<int>(sp.state_rows.rows()) : 0;
  const Eigen::VectorXd u_ref = sp.u_ref.size() == nu ? sp.u_ref : Eigen::VectorXd::Zero(nu);

  socp::Problem p;
  p.c = Eigen::VectorXd::Zero(nvar);
  p.c.segment(nu, n).setOnes();

  // equalities, rows normalized
  const int me = static_cast<int>(sp.eq_a.rows());
  {
    std::vector<Eigen::Triplet<double>> t;
    p.b.resize(me);
    for (int r = 0; r < me; ++r) {
      const double s = std::max(sp.eq_a.row(r).cwiseAbs().maxCoeff() * u_scale, 1e-300);
      for (int c = 0; c < nu; ++c) {
        if (sp.eq_a(r, c) != 0.0) t.emplace_back(r, c, sp.eq_a(r, c) * u_scale / s);
      }
      p.b[r] = sp.eq_b[r] / s;
    }
    p.A.resize(me, nvar);
    p.A.setFromTriplets(t.begin(), t.end());
  }

  const int m_lp = mr + ng + (box ? 2 * nu : 0) + 2 * ms;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m_lp + 4 * n);
  int row = 0;
  for (int r = 0; r < mr; ++r, ++row) {
    const double s = std::max(sp.ineq_a.row(r).cwiseAbs().maxCoeff() * u_scale, 1e-12);
    for (int c = 0; c < nu; ++c) {
      if (sp.ineq_a(r, c) != 0.0) t.emplace_back(row, c, sp.ineq_a(r, c) * u_scale / s);
    }
    t.emplace_back(row, nu + n + group[r], -1.0 / s);
    h[row] = sp.ineq_b[r] / s;
  }
  for (int g = 0; g < ng; ++g, ++row) {
    t.emplace_back(row, nu + n + g, -1.0);
    p.c[nu + n + g] = sp.slack_penalty / u_scale;
  }
  if (box) {
    const double rad = sp.trust_radius / u_scale;
    for (int c = 0; c < nu; ++c) {
      t.emplace_back(row, c, 1.0);
      h[row++] = u_ref[c] / u_scale + rad;
      t.emplace_back(row, c, -1.0);
      h[row++] = -u_ref[c] / u_scale + rad;
    }
  }
  if (sbox) {
    const Eigen::VectorXd ref_val = sp.state_rows * u_ref;
    for (int r = 0; r < ms; ++r) {
      for (int sign : {1, -1}) {
        for (int c = 0; c < nu; ++c) {
          if (sp.state_rows(r, c) != 0.0) t.emplace_back(row, c, sign * sp.state_rows(r, c) * u_scale);
        }
        h[row++] = sign * ref_val[r] + sp.state_radius;
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    t.emplace_back(row, nu + j, -1.0);
    for (int k = 0; k < 3; ++k) t.emplace_back(row + 1 + k, 3 * j + k, -1.0);
    row += 4;
  }
  p.G.resize(row, nvar);
  p.G.setFromTriplets(t.begin(), t.end());
  p.h = h;
  p.cones.nonneg = m_lp;
  p.cones.soc_dims.assign(n, 4);

  const socp::Result r = socp::solve(p, ipm);
  SubproblemResult out;
  out.ipm_iterations = r.iterations;
  out.kkt_residual = std::max(r.primal_residual, r.dual_residual);
  if (r.status != socp::Status::Optimal) return out;
  out.ok = true;
  out.u = r.x.head(nu) * u_scale;
  out.slack = r.x.tail(ng).cwiseMax(0.0);
  out.fuel = impulse_norm_sum(out.u);
  out.cost = out.fuel + sp.slack_penalty * out.slack.sum();
  return out;
}

namespace detail {

struct PhaseContext {
  const PhaseProblem& ph;
  StateMap map;
  std::vector<DriftGeometry> geo;
  double q = 0.0;
};

struct NonlinearEval {
  double fuel = 0.0;
  double violation = 0.0;  // sum over control epochs of the positive worst margin
  double max_margin = -std::numeric_limits<double>::infinity();
  double merit(double penalty) const { return fuel + penalty * violation; }
};

inline NonlinearEval evaluate_nonlinear(const PhaseContext& ctx, const Eigen::VectorXd& u) {
  NonlinearEval ev;
  ev.fuel = impulse_norm_sum(u);
  if (!ctx.ph.safety) return ev;
  for (int j = 0; j < ctx.map.n_steps; ++j) {
    const RoeState xj(ctx.map.state(j, u));
    const Impulse uj(Vec3(u.segment<3>(3 * j)));
    const double tj = ctx.geo[j].t_j;
    const Covariance6 s0 = initial_dispersion(xj, uj, ctx.ph.oe, tj, ctx.ph.uncertainty, ctx.ph.gravity);
    const Vec6 x0 = xj.v + ctx.map.gamma[j] * uj.dv;
    const SafetyConstraintEval e =
        evaluate_drift(ctx.geo[j], x0, drift_covariances(ctx.geo[j], s0, ctx.ph.uncertainty.q_process), ctx.q);
    ev.violation += std::max(0.0, e.margin);
    ev.max_margin = std::max(ev.max_margin, e.margin);
  }
  return ev;
}

}  // namespace detail

/// Builds the per-epoch drift geometry of a phase (shared by all SCP iterations).
inline std::vector<DriftGeometry> phase_drift_geometry(const PhaseProblem& ph) {
  std::vector<DriftGeometry> geo;
  if (!ph.safety) {
    for (int j = 0; j < ph.n_steps; ++j) {
      DriftGeometry g;
      g.t_j = ph.t_start + j * ph.dt;
      geo.push_back(g);
    }
    return geo;
  }
  const std::vector<double> taus = drift_grid(ph.uncertainty.tau_s, ph.uncertainty.drift_step);
  for (int j = 0; j < ph.n_steps; ++j) {
    geo.push_back(DriftGeometry::build(ph.oe, ph.t_start + j * ph.dt, taus, ph.koz, ph.gravity));
  }
  return geo;
}

inline Trajectory solve_phase(const PhaseProblem& ph, const ScpSettings& settings,
                              const std::optional<Trajectory>& warm_start = std::nullopt) {
  settings.validate();
  detail::PhaseContext ctx{ph, eliminate_states(ph), phase_drift_geometry(ph),
                           risk_quantile(ph.uncertainty.delta_risk)};
  const int n = ph.n_steps;
  const int nu = 3 * n;
  const Eigen::MatrixXd E = ctx.map.terminal_rows();
  const Eigen::VectorXd f = ph.x_end.v - ctx.map.drift[n];

  Trajectory traj;
  auto finish = [&](const Eigen::VectorXd& u, ScpStatus status, int iters) {
    traj.status = status;
    traj.iterations = iters;
    traj.states.clear();
    traj.impulses.clear();
    traj.epochs.clear();
    for (int j = 0; j <= n; ++j) {
      traj.states.emplace_back(ctx.map.state(j, u));
      traj.epochs.push_back(ph.t_start + j * ph.dt);
    }
    for (int j = 0; j < n; ++j) traj.impulses.emplace_back(Vec3(u.segment<3>(3 * j)));
    traj.fuel = impulse_norm_sum(u);
    traj.max_margin = detail::evaluate_nonlinear(ctx, u).max_margin;
    traj.phase_status = {status};
    traj.failed_phase = status == ScpStatus::Converged ? -1 : 0;
    return traj;
  };

  // Reference: warm start, else the minimum-energy impulses meeting the terminal state.
  Eigen::VectorXd u_ref;
  if (warm_start && static_cast<int>(warm_start->impulses.size()) == n) {
    u_ref.resize(nu);
    for (int j = 0; j < n; ++j) u_ref.segment<3>(3 * j) = warm_start->impulses[j].dv;
  } else {
    u_ref = E.transpose() * (E * E.transpose()).ldlt().solve(f);
  }
  if (!u_ref.allFinite()) return finish(Eigen::VectorXd::Zero(nu), ScpStatus::SubproblemInfeasible, 0);

  double radius = settings.trust_radius_u;
  double radius_x = settings.trust_radius_x;
  detail::NonlinearEval ref_eval = detail::evaluate_nonlinear(ctx, u_ref);
  const double pen = settings.slack_penalty;

  for (int it = 1; it <= settings.max_iters; ++it) {
    Subproblem sp;
    sp.n_impulses = n;
    sp.eq_a = E;
    sp.eq_b = f;
    sp.u_ref = u_ref;
    sp.trust_radius = radius;
    sp.slack_penalty = pen;

    // Linearized safety rows in impulse space, pruned when they cannot bind
    // anywhere inside the trust box.
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    std::vector<double> offset;  // untightened: row . u + offset <= 0
    std::vector<int> groups;
    std::vector<int> row_epochs;
    double model_ref_violation = 0.0;
    if (ph.safety) {
      for (int j = 0; j < n; ++j) {
        const RoeState xj(ctx.map.state(j, u_ref));
        const Impulse uj(Vec3(u_ref.segment<3>(3 * j)));
        const auto lin = linearize_margin(ctx.geo[j], xj, uj, ph.oe, ph.uncertainty, settings.linearization, ph.gravity);
        const auto bj = ctx.map.B.middleRows(6 * j, 6);
        double worst = -std::numeric_limits<double>::infinity();
        bool epoch_kept = false;
        for (const auto& r : lin) {
          Eigen::RowVectorXd a = r.a.head<6>().transpose() * bj;
          a.segment<3>(3 * j) += r.a.tail<3>().transpose();
          const double c = r.b + r.a.head<6>().dot(ctx.map.drift[j]);
          const double at_ref = a.dot(u_ref) + c;
          worst = std::max(worst, at_ref);
          if (at_ref + a.cwiseAbs().sum() * radius < -settings.margin_buffer - 1e-9) continue;
          rows.push_back(a);
          // rows already inside the buffer may not move closer to the boundary
          const double bound = (at_ref > 0.0 || at_ref <= -settings.margin_buffer) ? -settings.margin_buffer : at_ref;
          rhs.push_back(-c + bound);
          offset.push_back(c);
          groups.push_back(static_cast<int>(row_epochs.size()));
          epoch_kept = true;
        }
        model_ref_violation += std::max(0.0, worst);
        if (epoch_kept) row_epochs.push_back(j);
      }
    }
    sp.ineq_a.resize(static_cast<int>(rows.size()), nu);
    sp.ineq_b.resize(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sp.ineq_a.row(static_cast<int>(r)) = rows[r];
      sp.ineq_b[static_cast<int>(r)] = rhs[r];
    }
    sp.slack_group = groups;
    if (!row_epochs.empty()) {
      sp.state_rows.resize(6 * static_cast<int>(row_epochs.size()), nu);
      for (std::size_t k = 0; k < row_epochs.size(); ++k) {
        sp.state_rows.middleRows(6 * static_cast<int>(k), 6) = ctx.map.B.middleRows(6 * row_epochs[k], 6);
      }
      sp.state_radius = radius_x;
    }

    const SubproblemResult sol = solve_socp_subproblem(sp);
    ScpIteration rec;
    rec.trust_radius = radius;
    rec.safety_rows = static_cast<int>(rows.size());
    if (!sol.ok) {
      rec.merit = ref_eval.merit(pen);
      traj.history.push_back(rec);
      return finish(u_ref, ScpStatus::SubproblemInfeasible, it);
    }

    const detail::NonlinearEval new_eval = detail::evaluate_nonlinear(ctx, sol.u);
    // Model merit against the untightened rows at both points.
    double model_new_violation = 0.0;
    {
      std::vector<double> worst(row_epochs.size(), -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double v = rows[r].dot(sol.u) + offset[r];
        worst[groups[r]] = std::max(worst[groups[r]], v);
      }
      for (double w : worst) model_new_violation += std::max(0.0, w);
    }
    const double model_ref = ref_eval.fuel + pen * model_ref_violation;
    const double predicted = model_ref - (sol.fuel + pen * model_new_violation);
    const double actual = ref_eval.merit(pen) - new_eval.merit(pen);
    const double scale = std::max(1e-9, std::abs(ref_eval.merit(pen)));
    const bool negligible = predicted <= 1e-10 * scale;
    if (negligible && ref_eval.max_margin <= settings.feas_tol) {
      rec.merit = ref_eval.merit(pen);
      rec.fuel = ref_eval.fuel;
      rec.max_margin = ref_eval.max_margin;
      traj.history.push_back(rec);
      return finish(u_ref, ScpStatus::Converged, it);
    }
    const double ratio = negligible ? 1.0 : actual / predicted;
    rec.ratio = ratio;

    const bool accept = negligible ? actual >= -1e-9 * scale : ratio >= settings.reject_ratio;
    if (!accept) {
      rec.merit = ref_eval.merit(pen);
      rec.fuel = ref_eval.fuel;
      rec.max_margin = ref_eval.max_margin;
      traj.history.push_back(rec);
      // shrink below the rejected step so the next subproblem cannot repeat it
      const double step = (sol.u - u_ref).cwiseAbs().maxCoeff();
      radius = 0.5 * std::min(radius, std::max(step, 1e-12));
      radius_x *= 0.5;
      continue;
    }

    double dx = 0.0;
    for (int j = 0; j <= n; ++j) {
      dx = std::max(dx, (ctx.map.state(j, sol.u) - ctx.map.state(j, u_ref)).cwiseAbs().maxCoeff());
    }
    const double dcost = std::abs(new_eval.merit(pen) - ref_eval.merit(pen)) /
                         std::max(std::abs(ref_eval.merit(pen)), 1e-9);
    const bool box_binding = (sol.u - u_ref).cwiseAbs().maxCoeff() >= 0.999 * radius;
    const bool feasible = new_eval.max_margin <= settings.feas_tol;

    u_ref = sol.u;
    ref_eval = new_eval;
    rec.accepted = true;
    rec.merit = new_eval.merit(pen);
    rec.fuel = new_eval.fuel;
    rec.max_margin = new_eval.max_margin;
    traj.history.push_back(rec);

    const bool exact_model = rows.empty() && !ph.safety;
    if (feasible && ((exact_model && !box_binding) ||
                     (dx < settings.conv_tol_state && dcost < settings.conv_tol_cost))) {
      return finish(u_ref, ScpStatus::Converged, it);
    }
    if (ratio > settings.expand_ratio) {
      radius = std::min(2.0 * radius, settings.trust_radius_max);
      radius_x = std::min(2.0 * radius_x, 4.0 * settings.trust_radius_x);
    }
  }
  return finish(u_ref, ScpStatus::MaxIters, settings.max_iters);
}

/// Everything a mission solve needs besides the initial state and the plan.
struct MissionContext {
  OrbitalElements oe = reference_chief();
  KeepOutZone koz;
  UncertaintyConfig uncertainty;
  double dt = 900.0;
  int n_max = kMaxSteps;
  bool safety = true;
  ScpSettings scp;
  GravityModel gravity = kEarth;
};

inline std::vector<PhaseProblem> mission_phases(const RoeState& x0, const WaypointPlan& plan,
                                                const MissionContext& ctx) {
  plan.validate(static_cast<int>(plan.waypoints.size()), ctx.n_max);
  std::vector<PhaseProblem> out;
  RoeState start = x0;
  double t = 0.0;
  for (int k = 0; k < plan.phases(); ++k) {
    PhaseProblem ph;
    ph.x_start = start;
    ph.x_end = plan.waypoints[k].state();
    ph.n_steps = plan.durations[k];
    ph.t_start = t;
    ph.dt = ctx.dt;
    ph.koz = ctx.koz;
    ph.uncertainty = ctx.uncertainty;
    ph.oe = ctx.oe;
    ph.safety = ctx.safety;
    ph.gravity = ctx.gravity;
    out.push_back(ph);
    start = ph.x_end;
    t += ph.n_steps * ctx.dt;
  }
  return out;
}

/// Joins phase solutions; the boundary state appears once, owned by the later phase.
inline Trajectory concatenate_phases(const std::vector<Trajectory>& parts) {
  Trajectory out;
  out.status = ScpStatus::Converged;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Trajectory& p = parts[k];
    const std::size_t skip = out.states.empty() ? 0 : 1;
    if (skip) {
      out.states.pop_back();
      out.epochs.pop_back();
    }
    out.states.insert(out.states.end(), p.states.begin(), p.states.end());
    out.epochs.insert(out.epochs.end(), p.epochs.begin(), p.epochs.end());
    out.impulses.insert(out.impulses.end(), p.impulses.begin(), p.impulses.end());
    out.fuel += p.fuel;
    out.iterations += p.iterations;
    out.max_margin = std::max(out.max_margin, p.max_margin);
    out.phase_status.push_back(p.status);
    out.history.insert(out.history.end(), p.history.begin(), p.history.end());
    if (p.status != ScpStatus::Converged && out.failed_phase < 0) {
      out.failed_phase = static_cast<int>(k);
      out.status = p.status;
    }
  }
  return out;
}

inline Trajectory solve_mission(const RoeState& x0, const WaypointPlan& plan, const MissionContext& ctx) {
  const auto phases = mission_phases(x0, plan, ctx);
  std::vector<Trajectory> parts;
  parts.reserve(phases.size());
  for (const auto& ph : phases) parts.push_back(solve_phase(ph, ctx.scp));
  return concatenate_phases(parts);
}

}  // namespace itg
