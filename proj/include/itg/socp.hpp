#pragma once

// Primal-dual interior-point solver for second-order cone programs
//
//   minimize    c'x
//   subject to  A x = b
//               G x + s = h,   s in K = R+^l x Q^{q_1} x ... x Q^{q_m}
//
// Nesterov-Todd scaling with a Mehrotra predictor-corrector, following the
// structure of the CVXOPT cone LP solver. Newton systems are reduced to the
// normal matrix G' W^-2 G and a Schur complement on the equality rows.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace itg::socp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Cones {
  int nonneg = 0;               // leading orthant rows of G
  std::vector<int> soc_dims;    // following second-order cone blocks
  int rows() const {
    int m = nonneg;
    for (int q : soc_dims) m += q;
    return m;
  }
  int degree() const { return nonneg + static_cast<int>(soc_dims.size()); }
};

struct Problem {
  VectorXd c;
  SparseMatrix A;  // p x n
  VectorXd b;
  SparseMatrix G;  // m x n
  VectorXd h;
  Cones cones;
};

struct Settings {
  int max_iters = 80;
  double tol_feas = 1e-9;
  double tol_gap_abs = 1e-9;
  double tol_gap_rel = 1e-8;
  // accepted when the iteration stalls numerically
  double tol_feas_reduced = 1e-7;
  double tol_gap_rel_reduced = 1e-6;
  double regularization = 1e-12;
  double step_fraction = 0.99;
  bool verbose = false;
};

enum class Status { Optimal, MaxIters, NumericalError };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIters: return "max_iters";
    case Status::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct Result {
  Status status = Status::NumericalError;
  VectorXd x, y, z, s;
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

// Block-diagonal NT scaling. LP rows: diagonal w. SOC blocks: dense W and W^-1.
struct Scaling {
  VectorXd w_lp;
  std::vector<MatrixXd> w_soc;
  std::vector<MatrixXd> winv_soc;
};

// u0^2 - |u1|^2 in factored form to limit cancellation near the boundary.
inline double soc_jnorm2(const VectorXd& u) {
  const double t = u.tail(u.size() - 1).norm();
  return (u[0] - t) * (u[0] + t);
}

template <typename F>
void for_each_block(const Cones& k, F&& f) {
  int off = k.nonneg;
  for (std::size_t b = 0; b < k.soc_dims.size(); ++b) {
    f(b, off, k.soc_dims[b]);
    off += k.soc_dims[b];
  }
}

inline std::optional<Scaling> compute_scaling(const Cones& k, const VectorXd& s, const VectorXd& z) {
  Scaling sc;
  sc.w_lp = (s.head(k.nonneg).array() / z.head(k.nonneg).array()).sqrt();
  bool ok = sc.w_lp.allFinite();
  for_each_block(k, [&](std::size_t, int off, int q) {
    const VectorXd sb = s.segment(off, q);
    const VectorXd zb = z.segment(off, q);
    const double sjs = soc_jnorm2(sb);
    const double zjz = soc_jnorm2(zb);
    if (!(sjs > 0.0) || !(zjz > 0.0)) {
      ok = false;
      sc.w_soc.emplace_back(MatrixXd::Identity(q, q));
      sc.winv_soc.emplace_back(MatrixXd::Identity(q, q));
      return;
    }
    const VectorXd sn = sb / std::sqrt(sjs);
    const VectorXd zn = zb / std::sqrt(zjz);
    const double gamma = std::sqrt(0.5 * (1.0 + sn.dot(zn)));
    VectorXd jz = zn;
    jz.tail(q - 1) *= -1.0;
    const VectorXd wbar = (sn + jz) / (2.0 * gamma);
    // W = eta (2 v v' - J), v = (wbar + e) / sqrt(2 (wbar_0 + 1))
    VectorXd v = wbar;
    v[0] += 1.0;
    v /= std::sqrt(2.0 * (wbar[0] + 1.0));
    const double eta = std::pow(sjs / zjz, 0.25);
    MatrixXd J = MatrixXd::Identity(q, q);
    J.bottomRightCorner(q - 1, q - 1) *= -1.0;
    const VectorXd jv = J * v;
    sc.w_soc.emplace_back(eta * (2.0 * v * v.transpose() - J));
    sc.winv_soc.emplace_back((2.0 * jv * jv.transpose() - J) / eta);
  });
  if (!ok) return std::nullopt;
  return sc;
}

inline VectorXd apply_w(const Cones& k, const Scaling& sc, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(k.nonneg) = sc.w_lp.array() * v.head(k.nonneg).array();
  for_each_block(k, [&](std::size_t b, int off, int q) { out.segment(off, q) = sc.w_soc[b] * v.segment(off, q); });
  return out;
}

inline VectorXd apply_winv(const Cones& k, const Scaling& sc, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(k.nonneg) = v.head(k.nonneg).array() / sc.w_lp.array();
  for_each_block(k, [&](std::size_t b, int off, int q) { out.segment(off, q) = sc.winv_soc[b] * v.segment(off, q); });
  return out;
}

// Jordan product u o v.
inline VectorXd jordan(const Cones& k, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out.head(k.nonneg) = u.head(k.nonneg).array() * v.head(k.nonneg).array();
  for_each_block(k, [&](std::size_t, int off, int q) {
    out[off] = u.segment(off, q).dot(v.segment(off, q));
    out.segment(off + 1, q - 1) = u[off] * v.segment(off + 1, q - 1) + v[off] * u.segment(off + 1, q - 1);
  });
  return out;
}

// Solves lambda o x = v for x.
inline VectorXd jordan_div(const Cones& k, const VectorXd& lambda, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(k.nonneg) = v.head(k.nonneg).array() / lambda.head(k.nonneg).array();
  for_each_block(k, [&](std::size_t, int off, int q) {
    const double l0 = lambda[off];
    const auto l1 = lambda.segment(off + 1, q - 1);
    const auto v1 = v.segment(off + 1, q - 1);
    const double l1n = l1.norm();
    const double det = (l0 - l1n) * (l0 + l1n);
    const double x0 = (l0 * v[off] - l1.dot(v1)) / det;
    out[off] = x0;
    out.segment(off + 1, q - 1) = (v1 - x0 * l1) / l0;
  });
  return out;
}

inline VectorXd identity_element(const Cones& k, int m) {
  VectorXd e = VectorXd::Zero(m);
  e.head(k.nonneg).setOnes();
  for_each_block(k, [&](std::size_t, int off, int) { e[off] = 1.0; });
  return e;
}

// Largest alpha with v + alpha d in the cone (infinity if unbounded).
inline double max_step(const Cones& k, const VectorXd& v, const VectorXd& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k.nonneg; ++i) {
    if (d[i] < 0.0) alpha = std::min(alpha, -v[i] / d[i]);
  }
  for_each_block(k, [&](std::size_t, int off, int q) {
    const double v0 = v[off], d0 = d[off];
    const auto v1 = v.segment(off + 1, q - 1);
    const auto d1 = d.segment(off + 1, q - 1);
    // f(t) = (v0 + t d0)^2 - |v1 + t d1|^2 = a t^2 + 2 b t + c
    const double a = d0 * d0 - d1.squaredNorm();
    const double bb = v0 * d0 - v1.dot(d1);
    const double c = std::max(0.0, v0 * v0 - v1.squaredNorm());
    double t = std::numeric_limits<double>::infinity();
    if (d0 >= 0.0 && a >= 0.0) {
      // direction inside the cone: never leaves
    } else {
      const double disc = bb * bb - a * c;
      if (a == 0.0) {
        if (bb < 0.0) t = -c / (2.0 * bb);
      } else if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        // roots of a t^2 + 2 b t + c, stable form
        const double qv = -(bb + std::copysign(sq, bb));
        double r1 = qv / a;
        double r2 = qv != 0.0 ? c / qv : std::numeric_limits<double>::infinity();
        for (double r : {r1, r2}) {
          if (r > 0.0 && r < t) t = r;
        }
      }
      if (d0 < 0.0) t = std::min(t, -v0 / d0);
    }
    alpha = std::min(alpha, t);
  });
  return alpha;
}

// Shift v into the interior of the cone if needed.
inline VectorXd make_interior(const Cones& k, const VectorXd& v) {
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k.nonneg; ++i) shift = std::max(shift, -v[i]);
  for_each_block(k, [&](std::size_t, int off, int q) {
    shift = std::max(shift, v.segment(off + 1, q - 1).norm() - v[off]);
  });
  if (shift < 0.0) return v;
  return v + (1.0 + shift) * identity_element(k, static_cast<int>(v.size()));
}

// Factorized KKT system [0 A' G'; A 0 0; G 0 -W^2].
class KktSolver {
 public:
  KktSolver(const Problem& p, const Scaling* sc, double reg) : p_(p), sc_(sc) {
    MatrixXd h;
    if (sc) {
      const SparseMatrix wg = block_winv(p.cones, *sc, static_cast<int>(p.G.rows())) * p.G;
      h = MatrixXd(SparseMatrix(wg.transpose() * wg));
    } else {
      h = MatrixXd(SparseMatrix(p.G.transpose() * p.G));
    }
    // Symmetric diagonal equilibration before Cholesky; the apex of a cone
    // drives some diagonal entries of G'W^-2 G far above the rest.
    d_ = h.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    h = d_.asDiagonal() * h * d_.asDiagonal();
    h.diagonal().array() += reg;
    llt_.compute(h);
    ok_ = llt_.info() == Eigen::Success;
    if (p.A.rows() > 0 && ok_) {
      const MatrixXd at = d_.asDiagonal() * MatrixXd(p.A.transpose());
      hinv_at_ = d_.asDiagonal() * llt_.solve(at);
      MatrixXd schur = MatrixXd(p.A) * hinv_at_;
      e_ = schur.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      schur = e_.asDiagonal() * schur * e_.asDiagonal();
      schur.diagonal().array() += reg;
      schur_.compute(schur);
      ok_ = schur_.info() == Eigen::Success;
    }
  }

  bool ok() const { return ok_; }

  // Solve with iterative refinement against the unreduced KKT residual.
  void solve(const VectorXd& bx, const VectorXd& by, const VectorXd& bz, VectorXd& dx, VectorXd& dy,
             VectorXd& dz, int refine = 8) const {
    solve_once(bx, by, bz, dx, dy, dz);
    const double scale = 1.0 + bx.norm() + by.norm() + bz.norm();
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 0; r < refine; ++r) {
      const VectorXd ex = bx - (p_.A.transpose() * dy + p_.G.transpose() * dz);
      const VectorXd ey = by - p_.A * dx;
      const VectorXd ez = bz - (p_.G * dx - w2(dz));
      const double err = ex.norm() + ey.norm() + ez.norm();
      if (err < 1e-15 * scale || err > 0.5 * prev) break;
      prev = err;
      VectorXd cx, cy, cz;
      solve_once(ex, ey, ez, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  void solve_once(const VectorXd& bx, const VectorXd& by, const VectorXd& bz, VectorXd& dx, VectorXd& dy,
                  VectorXd& dz) const {
    // z = W^-2 (G x - bz);  A'y + G'W^-2 G x = bx + G'W^-2 bz;  A x = by
    const VectorXd w2bz = winv2(bz);
    const VectorXd rhs = bx + p_.G.transpose() * w2bz;
    const VectorXd hr = d_.asDiagonal() * llt_.solve(d_.asDiagonal() * rhs);
    if (p_.A.rows() > 0) {
      dy = e_.asDiagonal() * schur_.solve(e_.asDiagonal() * (p_.A * hr - by));
      dx = hr - hinv_at_ * dy;
    } else {
      dy.resize(0);
      dx = hr;
    }
    dz = winv2(p_.G * dx - bz);
  }

  VectorXd w2(const VectorXd& v) const {
    if (!sc_) return v;
    return apply_w(p_.cones, *sc_, apply_w(p_.cones, *sc_, v));
  }

  static SparseMatrix block_winv(const Cones& k, const Scaling& sc, int m) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(k.nonneg + 16 * k.soc_dims.size());
    for (int i = 0; i < k.nonneg; ++i) trip.emplace_back(i, i, 1.0 / sc.w_lp[i]);
    for_each_block(k, [&](std::size_t b, int off, int q) {
      for (int r = 0; r < q; ++r) {
        for (int c = 0; c < q; ++c) trip.emplace_back(off + r, off + c, sc.winv_soc[b](r, c));
      }
    });
    SparseMatrix w(m, m);
    w.setFromTriplets(trip.begin(), trip.end());
    return w;
  }

  VectorXd winv2(const VectorXd& v) const {
    if (!sc_) return v;
    return apply_winv(p_.cones, *sc_, apply_winv(p_.cones, *sc_, v));
  }

  const Problem& p_;
  const Scaling* sc_;
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LLT<MatrixXd> schur_;
  MatrixXd hinv_at_;
  VectorXd d_;
  VectorXd e_;
  bool ok_ = false;
};

}  // namespace detail

inline Result solve(const Problem& p, const Settings& st = {}) {
  using namespace detail;
  auto close = [&st](const Result& r) {
    return r.primal_residual < st.tol_feas_reduced && r.dual_residual < st.tol_feas_reduced &&
           (r.gap < st.tol_gap_abs || r.gap < st.tol_gap_rel_reduced * std::abs(r.primal_objective));
  };
  auto score = [](const Result& r) {
    return std::max({r.primal_residual, r.dual_residual, r.gap / std::max(1.0, std::abs(r.primal_objective))});
  };
  // Best iterate meeting the reduced tolerances, returned if the iteration breaks down later.
  std::optional<Result> best;
  auto stall = [&](Result& r) {
    if (close(r) && (!best || score(r) <= score(*best))) {
      r.status = Status::Optimal;
      return r;
    }
    if (best) {
      r = *best;
      r.status = Status::Optimal;
      return r;
    }
    r.status = Status::NumericalError;
    return r;
  };
  const Cones& k = p.cones;
  const int n = static_cast<int>(p.c.size());
  const int m = static_cast<int>(p.h.size());
  const int np = static_cast<int>(p.b.size());
  const double nu = std::max(1, k.degree());
  Result res;

  // Initial point: least-squares primal, least-norm dual, both shifted inside K.
  {
    KktSolver kkt(p, nullptr, std::max(st.regularization, 1e-10));
    if (!kkt.ok()) return res;
    VectorXd x, y, zz;
    kkt.solve(VectorXd::Zero(n), p.b, p.h, x, y, zz);
    res.x = x;
    res.s = make_interior(k, -zz);
    VectorXd x2, y2, z2;
    kkt.solve(-p.c, VectorXd::Zero(np), VectorXd::Zero(m), x2, y2, z2);
    res.y = y2;
    res.z = make_interior(k, z2);
  }

  const double bnorm = std::max(1.0, std::sqrt(p.b.squaredNorm() + p.h.squaredNorm()));
  const double cnorm = std::max(1.0, p.c.norm());

  for (int it = 0; it <= st.max_iters; ++it) {
    res.iterations = it;
    const VectorXd rx = p.A.transpose() * res.y + p.G.transpose() * res.z + p.c;
    const VectorXd ry = p.A * res.x - p.b;
    const VectorXd rz = p.G * res.x + res.s - p.h;
    const double gap = res.s.dot(res.z);
    const double pobj = p.c.dot(res.x);
    res.primal_objective = pobj;
    res.primal_residual = std::sqrt(ry.squaredNorm() + rz.squaredNorm()) / bnorm;
    res.dual_residual = rx.norm() / cnorm;
    res.gap = gap;
    if (st.verbose) {
      std::fprintf(stderr, "socp %3d  pobj % .9e  pres %.2e  dres %.2e  gap %.2e\n", it, pobj,
                   res.primal_residual, res.dual_residual, gap);
    }
    if (!std::isfinite(gap) || !res.x.allFinite()) return stall(res);
    if (res.primal_residual < st.tol_feas && res.dual_residual < st.tol_feas &&
        (gap < st.tol_gap_abs || gap < st.tol_gap_rel * std::abs(pobj))) {
      res.status = Status::Optimal;
      return res;
    }
    if (close(res) && (!best || score(res) <= score(*best))) best = res;
    if (it == st.max_iters) break;

    const double mu = gap / nu;
    const auto sc = compute_scaling(k, res.s, res.z);
    if (!sc) return stall(res);
    const VectorXd lambda = apply_w(k, *sc, res.z);
    const VectorXd lsq = jordan(k, lambda, lambda);
    KktSolver kkt(p, &*sc, st.regularization);
    if (!kkt.ok()) return stall(res);

    auto newton = [&](const VectorXd& ds_rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds) {
      const VectorXd ldiv = jordan_div(k, lambda, ds_rhs);
      const VectorXd bz = -rz - apply_w(k, *sc, ldiv);
      kkt.solve(-rx, -ry, bz, dx, dy, dz);
      ds = apply_w(k, *sc, ldiv - apply_w(k, *sc, dz));
    };

    VectorXd dx, dy, dz, ds;
    newton(-lsq, dx, dy, dz, ds);
    double a_aff = std::min(1.0, std::min(max_step(k, res.s, ds), max_step(k, res.z, dz)));
    const double sigma = std::pow(1.0 - a_aff, 3);

    const VectorXd corr = jordan(k, apply_winv(k, *sc, ds), apply_w(k, *sc, dz));
    const VectorXd e = identity_element(k, m);
    newton(-lsq - corr + sigma * mu * e, dx, dy, dz, ds);
    double alpha = std::min(max_step(k, res.s, ds), max_step(k, res.z, dz));
    alpha = std::min(1.0, st.step_fraction * alpha);
    if (!(alpha > 0.0) || !std::isfinite(alpha) || !dx.allFinite() || !dz.allFinite()) return stall(res);
    res.x += alpha * dx;
    res.y += alpha * dy;
    res.z += alpha * dz;
    res.s += alpha * ds;
  }
  stall(res);
  if (res.status != Status::Optimal) res.status = Status::MaxIters;
  return res;
}

}  // namespace itg::socp
