#include "itg/socp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace itg::socp {
namespace {

SparseMatrix sparse(const MatrixXd& m) { return m.sparseView(); }

TEST(Socp, SmallLinearProgram) {
  // min -x1 - 2 x2  s.t. x1 + x2 <= 4, x1 <= 3, x2 <= 2, x >= 0   -> (2, 2), obj -6
  Problem p;
  p.c = Eigen::Vector2d(-1.0, -2.0);
  MatrixXd g(5, 2);
  g << 1, 1, 1, 0, 0, 1, -1, 0, 0, -1;
  p.G = sparse(g);
  p.h = (VectorXd(5) << 4, 3, 2, 0, 0).finished();
  p.A.resize(0, 2);
  p.b.resize(0);
  p.cones.nonneg = 5;
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.x[0], 2.0, 1e-7);
  EXPECT_NEAR(r.x[1], 2.0, 1e-7);
  EXPECT_NEAR(r.primal_objective, -6.0, 1e-7);
}

TEST(Socp, SumOfNormsWithEquality) {
  // min |u1| + |u2| s.t. u1 + u2 = b (u in R^3): optimum |b|.
  // Variables: u1(3), u2(3), t1, t2.
  const Eigen::Vector3d bvec(0.3, -0.4, 1.2);
  Problem p;
  p.c = VectorXd::Zero(8);
  p.c[6] = p.c[7] = 1.0;
  MatrixXd a = MatrixXd::Zero(3, 8);
  a.block(0, 0, 3, 3).setIdentity();
  a.block(0, 3, 3, 3).setIdentity();
  p.A = sparse(a);
  p.b = bvec;
  MatrixXd g = MatrixXd::Zero(8, 8);
  // cone block 1: (t1, u1), G x + s = h -> s = -G x with G = -[e_t1; I_u1]
  g(0, 6) = -1.0;
  g.block(1, 0, 3, 3) = -Eigen::Matrix3d::Identity();
  g(4, 7) = -1.0;
  g.block(5, 3, 3, 3) = -Eigen::Matrix3d::Identity();
  p.G = sparse(g);
  p.h = VectorXd::Zero(8);
  p.cones.soc_dims = {4, 4};
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.primal_objective, bvec.norm(), 1e-7);
  EXPECT_LT((r.x.head(3) + r.x.segment(3, 3) - bvec).norm(), 1e-8);
}

TEST(Socp, DistanceToHyperplane) {
  // min t s.t. |x - p0| <= t, a'x = 1  -> |a'p0 - 1| / |a|
  const Eigen::Vector2d p0(3.0, -1.0), av(1.0, 2.0);
  Problem p;
  p.c = (VectorXd(3) << 0, 0, 1).finished();
  p.A = sparse((MatrixXd(1, 3) << av[0], av[1], 0).finished());
  p.b = VectorXd::Constant(1, 1.0);
  MatrixXd g = MatrixXd::Zero(3, 3);
  g(0, 2) = -1.0;
  g(1, 0) = -1.0;
  g(2, 1) = -1.0;
  p.G = sparse(g);
  p.h = (VectorXd(3) << 0, -p0[0], -p0[1]).finished();
  p.cones.soc_dims = {3};
  const Result r = solve(p);
  ASSERT_EQ(r.status, Status::Optimal);
  EXPECT_NEAR(r.primal_objective, std::abs(av.dot(p0) - 1.0) / av.norm(), 1e-7);
}

TEST(Socp, InfeasibleProblemIsReported) {
  // x >= 1 and x <= 0
  Problem p;
  p.c = VectorXd::Constant(1, 1.0);
  p.G = sparse((MatrixXd(2, 1) << -1.0, 1.0).finished());
  p.h = (VectorXd(2) << -1.0, 0.0).finished();
  p.A.resize(0, 1);
  p.b.resize(0);
  p.cones.nonneg = 2;
  const Result r = solve(p);
  EXPECT_NE(r.status, Status::Optimal);
}

TEST(Socp, NesterovToddScalingIdentity) {
  Cones k;
  k.soc_dims = {4};
  const VectorXd s = (VectorXd(4) << 2.0, 0.3, -0.5, 1.0).finished();
  const VectorXd z = (VectorXd(4) << 1.5, -0.2, 0.4, 0.9).finished();
  const auto sc = detail::compute_scaling(k, s, z);
  ASSERT_TRUE(sc.has_value());
  const VectorXd wz = detail::apply_w(k, *sc, z);
  const VectorXd winv_s = detail::apply_winv(k, *sc, s);
  EXPECT_LT((wz - winv_s).norm(), 1e-12);
  EXPECT_LT((sc->w_soc[0] * sc->winv_soc[0] - MatrixXd::Identity(4, 4)).norm(), 1e-12);
}

TEST(Socp, RandomFeasibleProblemsSatisfyKkt) {
  // min sum_j |u_j| + 10 sum slack  s.t. M u = r, row_i . u - slack_i <= b_i, slack >= 0
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int nb = 6, nrow = 5;
    const int n = 3 * nb + nb + nrow;
    MatrixXd m(4, 3 * nb);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    VectorXd u0(3 * nb);
    for (int i = 0; i < u0.size(); ++i) u0[i] = nd(rng);
    Problem p;
    p.c = VectorXd::Zero(n);
    p.c.segment(3 * nb, nb).setOnes();
    p.c.tail(nrow).setConstant(10.0);
    MatrixXd a = MatrixXd::Zero(4, n);
    a.leftCols(3 * nb) = m;
    p.A = sparse(a);
    p.b = m * u0;
    MatrixXd g = MatrixXd::Zero(2 * nrow + 4 * nb, n);
    VectorXd h = VectorXd::Zero(g.rows());
    for (int i = 0; i < nrow; ++i) {
      for (int j = 0; j < 3 * nb; ++j) g(i, j) = nd(rng);
      g(i, 3 * nb + nb + i) = -1.0;
      h[i] = nd(rng);
      g(nrow + i, 3 * nb + nb + i) = -1.0;
    }
    for (int j = 0; j < nb; ++j) {
      const int off = 2 * nrow + 4 * j;
      g(off, 3 * nb + j) = -1.0;
      g.block(off + 1, 3 * j, 3, 3) = -Eigen::Matrix3d::Identity();
    }
    p.G = sparse(g);
    p.h = h;
    p.cones.nonneg = 2 * nrow;
    p.cones.soc_dims.assign(nb, 4);
    const Result r = solve(p);
    ASSERT_EQ(r.status, Status::Optimal) << "trial " << trial;
    EXPECT_LT(r.primal_residual, 1e-7);
    EXPECT_LT(r.dual_residual, 1e-7);
    EXPECT_LT((m * r.x.head(3 * nb) - p.b).norm(), 1e-7);
  }
}

}  // namespace
}  // namespace itg::socp
