#include <gtest/gtest.h>

#include <random>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/stabilization.hpp"
#include "support.hpp"

namespace dhgmpc {
namespace {

using testing::canonical;

TEST(Linearize, CanonicalDimensions) {
  const CaseStudy& cs = canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[0], 60.0);
  EXPECT_EQ(lin.a.rows(), 18);
  EXPECT_EQ(lin.a.cols(), 18);
  EXPECT_EQ(lin.b.rows(), 18);
  EXPECT_EQ(lin.b.cols(), 7);
  EXPECT_THROW(linearize(cs.plant(), cs.steady[0], 0.0), std::invalid_argument);
}

TEST(Linearize, MatchesFiniteDifferencesOfEulerStep) {
  const CaseStudy& cs = canonical();
  const ThermoHydraulicModel& model = cs.plant();
  const double dt = cs.scenario.mpc.dt;
  const Eigen::VectorXd xs = unit_scale(model).cwiseInverse();
  Eigen::VectorXd us = Eigen::VectorXd::Ones(model.m());
  us.tail(model.layout().num_producers).setConstant(1000.0);
  for (int s = 0; s < 2; ++s) {
    const SteadyState& ss = cs.steady[s];
    const LinearizedModel lin = linearize(model, ss, dt);
    const Eigen::MatrixXd fa = testing::central_difference(
        [&](const Eigen::VectorXd& x) { return model.euler_step(x, ss.u, ss.d, dt); },
        ss.x, xs, 1e-6);
    const Eigen::MatrixXd fb = testing::central_difference(
        [&](const Eigen::VectorXd& u) { return model.euler_step(ss.x, u, ss.d, dt); },
        ss.u, us, 1e-6);
    EXPECT_LT(testing::relative_error(lin.a * xs.asDiagonal(), fa * xs.asDiagonal()),
              1e-6);
    EXPECT_LT(testing::relative_error(lin.b * us.asDiagonal(), fb * us.asDiagonal()),
              1e-6);
    // The frozen-mass convention only differs by terms proportional to f.
    EXPECT_LT(lin.mass_dependence_gap, 1e-8);
  }
}

TEST(Linearize, NoFlowGivesPureDecay) {
  const ThermoHydraulicModel& model = canonical().plant();
  const StateLayout& lay = model.layout();
  SteadyState ss = canonical().steady[0];
  ss.u.setZero();
  ss.x.tail(lay.temperatures()).setConstant(10.0);
  const double dt = 60.0;
  const LinearizedModel lin = linearize(model, ss, dt);
  const int nt = lay.temperatures();
  const Eigen::VectorXd mass = model.mass_diagonal(ss.x).tail(nt);
  const Eigen::MatrixXd expected =
      Eigen::MatrixXd::Identity(nt, nt) -
      dt * Eigen::MatrixXd(mass.cwiseInverse().cwiseProduct(model.loss()).asDiagonal());
  EXPECT_LT((lin.a.bottomRightCorner(nt, nt) - expected).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(Feedback, ZeroEpsilonIsOpenLoop) {
  const CaseStudy& cs = canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[0], 60.0);
  const StabilizingFeedback fb = construct_feedback(
      lin, cs.structure.right_inverse, cs.plant().layout().num_hot, 0.0);
  EXPECT_EQ(fb.g.norm(), 0.0);
  EXPECT_DOUBLE_EQ(fb.spectral_radius, spectral_radius(lin.a));
}

TEST(Feedback, HugeEpsilonFails) {
  const CaseStudy& cs = canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[0], 60.0);
  const StabilizingFeedback fb = construct_feedback(
      lin, cs.structure.right_inverse, cs.plant().layout().num_hot, 1e6);
  EXPECT_GT(fb.lyapunov_max_eig, 0.0);
  EXPECT_FALSE(fb.stable());
}

TEST(Feedback, InconsistentDimensionsThrow) {
  const CaseStudy& cs = canonical();
  const LinearizedModel lin = linearize(cs.plant(), cs.steady[0], 60.0);
  EXPECT_THROW(construct_feedback(lin, cs.structure.right_inverse, 3, 1.0),
               std::invalid_argument);
}

TEST(AutoEpsilon, ContractionAcceptsOne) {
  LinearizedModel lin;
  lin.a = 0.5 * Eigen::MatrixXd::Identity(3, 3);
  lin.b = Eigen::MatrixXd::Zero(3, 1);
  lin.mass = Eigen::VectorXd::Ones(3);
  lin.flow_sens = Eigen::MatrixXd::Zero(2, 1);
  lin.dt = 1.0;
  const StabilizingFeedback fb =
      auto_select_epsilon(lin, Eigen::MatrixXd::Identity(1, 1), 1);
  EXPECT_EQ(fb.epsilon, 1.0);
}

TEST(AutoEpsilon, CanonicalSucceedsAtSixtySeconds) {
  const CaseStudy& cs = canonical();
  for (int s = 0; s < 2; ++s) {
    const StabilizationReport rep = check_stabilization(cs, s, 60.0);
    const StabilizingFeedback& fb = rep.feedback;
    EXPECT_TRUE(fb.stable());
    EXPECT_LT(fb.spectral_radius, 1.0);
    EXPECT_LT(fb.lyapunov_max_eig, 0.0);
    EXPECT_GT(fb.epsilon, 0.0);
    // Heat-flow rows stay zero.
    const StateLayout& lay = cs.plant().layout();
    EXPECT_EQ(fb.g.bottomRows(lay.num_producers).norm(), 0.0);
  }
}

TEST(AutoEpsilon, HugeStepFails) {
  EXPECT_THROW(check_stabilization(canonical(), 0, 1e6), StabilizabilityError);
}

// V(x) = x' M x decreases along the closed-loop linearization.
TEST(StabilizationProperty, LyapunovDecreaseAlongLinearLoop) {
  const CaseStudy& cs = canonical();
  for (int s = 0; s < 2; ++s) {
    const StabilizationReport rep = check_stabilization(cs, s, 60.0);
    const Eigen::MatrixXd ad = rep.lin.a + rep.lin.b * rep.feedback.g;
    const Eigen::VectorXd& m = rep.lin.mass;
    std::mt19937_64 rng(29 + s);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(ad.rows());
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
      x.head(cs.plant().layout().num_hot) *= 100.0;
      double v = x.dot(m.cwiseProduct(x));
      for (int k = 0; k < 50; ++k) {
        x = ad * x;
        const double next = x.dot(m.cwiseProduct(x));
        ASSERT_LT(next, v + 1e-12 * v) << "trial " << trial << " step " << k;
        v = next;
      }
    }
    // A negative definite Lyapunov matrix implies a contraction.
    EXPECT_LT(spectral_radius(ad), 1.0);
  }
}

}  // namespace
}  // namespace dhgmpc
