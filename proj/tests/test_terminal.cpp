#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/terminal.hpp"
#include "support.hpp"

namespace dhgmpc {
namespace {

using testing::canonical;
using testing::canonical_terminals;

Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

ConstraintSet box(int n, int m, double x_half, double u_half) {
  ConstraintSet c;
  c.x_lb = Eigen::VectorXd::Constant(n, -x_half);
  c.x_ub = Eigen::VectorXd::Constant(n, x_half);
  c.u_lb = Eigen::VectorXd::Constant(m, -u_half);
  c.u_ub = Eigen::VectorXd::Constant(m, u_half);
  c.u_lin = Eigen::MatrixXd::Zero(0, m);
  return c;
}

// x+ = 0.5 x + u + 0.3 x^2, linearization (0.5, 1) at the origin.
class QuadraticToy final : public DiscreteModel {
 public:
  int state_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Constant(1, 0.5 * x(0) + u(0) + 0.3 * x(0) * x(0));
  }
  void linearize(const Eigen::VectorXd& x, const Eigen::VectorXd&,
                 const Eigen::VectorXd&, Eigen::MatrixXd* a,
                 Eigen::MatrixXd* b) const override {
    *a = m1(0.5 + 0.6 * x(0));
    *b = m1(1.0);
  }
};

SteadyState origin() {
  SteadyState ss;
  ss.x = Eigen::VectorXd::Zero(1);
  ss.u = Eigen::VectorXd::Zero(1);
  ss.d = Eigen::VectorXd::Zero(1);
  return ss;
}

TEST(Dare, ScalarRoot) {
  const DareSolution s = solve_dare(m1(0.5), m1(1.0), m1(1.0), m1(1.0));
  const double root = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  EXPECT_NEAR(s.p(0, 0), root, 1e-12);
  EXPECT_NEAR(s.k(0, 0), 0.5 * root / (1.0 + root), 1e-12);
  EXPECT_LT(s.residual, 1e-12);
}

TEST(Dare, UnstableScalar) {
  // P^2 - 4P - 1 = 0 for a = 2.
  const DareSolution s = solve_dare(m1(2.0), m1(1.0), m1(1.0), m1(1.0));
  EXPECT_NEAR(s.p(0, 0), 2.0 + std::sqrt(5.0), 1e-10);
}

TEST(Dare, NoInputReducesToLyapunov) {
  Eigen::MatrixXd a(2, 2);
  a << 0.5, 0.1, 0.0, 0.3;
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(2, 2);
  const DareSolution s =
      solve_dare(a, Eigen::MatrixXd::Zero(2, 1), q, m1(1.0));
  EXPECT_EQ(s.k.norm(), 0.0);
  EXPECT_LT((s.p - solve_discrete_lyapunov(a, q)).norm(), 1e-12);
}

TEST(Lyapunov, ScalarAndZeroMatrix) {
  EXPECT_NEAR(solve_discrete_lyapunov(m1(0.5), m1(1.0))(0, 0), 4.0 / 3.0, 1e-14);
  Eigen::MatrixXd q(2, 2);
  q << 2.0, 0.5, 0.5, 1.0;
  EXPECT_EQ(solve_discrete_lyapunov(Eigen::MatrixXd::Zero(2, 2), q), q);
  EXPECT_THROW(solve_discrete_lyapunov(m1(1.0), m1(1.0)), std::exception);
}

TEST(Lyapunov, ResidualOfRandomStableMatrix) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(5, 5);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = z(rng);
  a *= 0.9 / spectral_radius(a);
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(5, 5);
  const Eigen::MatrixXd p = solve_discrete_lyapunov(a, q);
  EXPECT_LT(lyapunov_residual(a, p, q), 1e-10);
}

TEST(BoxProjection, ClosedForms) {
  const Eigen::VectorXd h =
      ellipsoid_box_projection(Eigen::MatrixXd::Identity(3, 3), 4.0);
  EXPECT_EQ(h, Eigen::VectorXd::Constant(3, 2.0));
  const Eigen::VectorXd d =
      ellipsoid_box_projection(Eigen::Vector2d(4.0, 1.0).asDiagonal().toDenseMatrix(), 1.0);
  EXPECT_NEAR(d(0), 0.5, 1e-15);
  EXPECT_NEAR(d(1), 1.0, 1e-15);
}

TEST(BoxProjection, AgreesWithBoundarySamples) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  Eigen::MatrixXd g(3, 3);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = z(rng);
  const Eigen::MatrixXd p = g * g.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
  const double alpha = 2.5;
  const Eigen::VectorXd h = ellipsoid_box_projection(p, alpha);
  const Eigen::MatrixXd l_inv_t =
      p.llt().matrixU().solve(Eigen::MatrixXd::Identity(3, 3));
  Eigen::VectorXd seen = Eigen::VectorXd::Zero(3);
  for (int s = 0; s < 100000; ++s) {
    const Eigen::Vector3d w(z(rng), z(rng), z(rng));
    const Eigen::VectorXd e = std::sqrt(alpha) * l_inv_t * w.normalized();
    seen = seen.cwiseMax(e.cwiseAbs());
  }
  for (int i = 0; i < 3; ++i) {
    EXPECT_LE(seen(i), h(i) * (1.0 + 1e-12));
    EXPECT_GT(seen(i), 0.98 * h(i));
  }
}

TEST(Alpha, LinearPlantIsAdmissibilityLimited) {
  const AffineModel lin(m1(0.5), m1(1.0), Eigen::VectorXd::Zero(1),
                        Eigen::VectorXd::Zero(1));
  const ConstraintSet c = box(1, 1, 10.0, 10.0);
  const TerminalIngredients ti = synthesize_terminal(
      lin, origin(), m1(0.5), m1(1.0), c, Weights{m1(1.0), m1(1.0)});
  EXPECT_EQ(ti.alpha, ti.alpha_max);
  // The state box is the binding row: alpha = P x_max^2.
  EXPECT_NEAR(ti.alpha_max, 100.0 * ti.p(0, 0), 1e-9 * ti.alpha_max);
}

TEST(Alpha, NonlinearityShrinksTheLevel) {
  const QuadraticToy toy;
  const ConstraintSet c = box(1, 1, 10.0, 10.0);
  TerminalOptions opt;
  const TerminalIngredients ti = synthesize_terminal(
      toy, origin(), m1(0.5), m1(1.0), c, Weights{m1(1.0), m1(1.0)}, opt);
  EXPECT_LT(ti.alpha, ti.alpha_max);
  EXPECT_GT(ti.alpha, 0.0);
  auto worst = [&](double alpha) {
    const double e = std::sqrt(alpha / ti.p(0, 0));
    TerminalIngredients t = ti;
    return std::max(terminal_violation(toy, t, Eigen::VectorXd::Constant(1, e)),
                    terminal_violation(toy, t, Eigen::VectorXd::Constant(1, -e)));
  };
  EXPECT_LE(worst(ti.alpha), 0.0);
  EXPECT_GT(worst(ti.alpha * (1.0 + 3.0 * opt.alpha_rel_tol)), 0.0);
}

TEST(Alpha, SteadyStateOnBoundaryThrows) {
  const AffineModel lin(m1(0.5), m1(1.0), Eigen::VectorXd::Zero(1),
                        Eigen::VectorXd::Zero(1));
  ConstraintSet c = box(1, 1, 10.0, 10.0);
  c.x_ub(0) = 0.0;
  EXPECT_THROW(synthesize_terminal(lin, origin(), m1(0.5), m1(1.0), c,
                                   Weights{m1(1.0), m1(1.0)}),
               TerminalError);
}

TEST(CanonicalTerminal, IngredientsAreConsistent) {
  const CaseStudy& cs = canonical();
  for (int s = 0; s < 2; ++s) {
    const TerminalIngredients& ti = canonical_terminals()[s];
    EXPECT_LE(ti.dare_residual, 1e-10);
    EXPECT_LE(ti.lyapunov_residual, 1e-10);
    EXPECT_LT(ti.closed_loop_radius, 1.0);
    EXPECT_GT(ti.alpha, 0.0);
    EXPECT_LE(ti.alpha, ti.alpha_max);
    EXPECT_EQ(ti.x_bar, cs.steady[s].x);
    EXPECT_EQ(ti.u_bar, cs.steady[s].u);
    // P dominates the LQR value function since Q* is inflated.
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ti.p - ti.p_lqr).eigenvalues();
    EXPECT_GT(ev.minCoeff(), 0.0);
    const Eigen::VectorXd proj = table_projection(cs, ti);
    ASSERT_EQ(proj.size(), 4);
    EXPECT_GT(proj.minCoeff(), 0.0);
  }
}

TEST(CanonicalTerminal, DecreaseHoldsOnSampledBoundary) {
  const CaseStudy& cs = canonical();
  for (int s = 0; s < 2; ++s) {
    const DecreaseCheck chk = verify_terminal_decrease(
        cs.discrete(), canonical_terminals()[s], cs.constraints, 1000, 17 + s);
    EXPECT_EQ(chk.samples, 1000);
    EXPECT_TRUE(chk.passed()) << "setpoint " << s << " worst "
                              << chk.worst_decrease;
  }
}

TEST(CanonicalTerminal, LinearizedPlantReachesAlphaMax) {
  const CaseStudy& cs = canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[1], cs.scenario.mpc.dt);
  const AffineModel affine(lin.a, lin.b, cs.steady[1].x, cs.steady[1].u);
  const TerminalIngredients ti = synthesize_terminal(
      affine, cs.steady[1], lin.a, lin.b, cs.constraints, cs.weights);
  EXPECT_EQ(ti.alpha, ti.alpha_max);
}

TEST(CanonicalTerminal, Deterministic) {
  const TerminalIngredients again = synthesize_case_terminal(canonical(), 0);
  EXPECT_EQ(again.p, canonical_terminals()[0].p);
  EXPECT_EQ(again.alpha, canonical_terminals()[0].alpha);
}

}  // namespace
}  // namespace dhgmpc
