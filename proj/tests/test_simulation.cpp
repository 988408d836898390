#include <gtest/gtest.h>

#include <sstream>

#include "dhgmpc/csv.hpp"
#include "dhgmpc/simulation.hpp"
#include "support.hpp"

namespace dhgmpc {
namespace {

using testing::canonical;
using testing::canonical_terminals;

ClosedLoopResult short_run(Variant v, int steps) {
  SimulationOptions opt;
  opt.variant = v;
  opt.steps = steps;
  return run_closed_loop(canonical(), canonical_terminals(), opt);
}

TEST(ClosedLoop, SteadyStateIsInvariant) {
  const CaseStudy& cs = canonical();
  SimulationOptions opt;
  opt.initial_state = cs.steady[0].x;
  opt.k_step = 200;
  opt.steps = 15;
  const ClosedLoopResult r = run_closed_loop(cs, canonical_terminals(), opt);
  const Eigen::VectorXd scale = unit_scale(cs.plant());
  for (const Eigen::VectorXd& x : r.states()) {
    EXPECT_LT((x - cs.steady[0].x).cwiseProduct(scale).lpNorm<Eigen::Infinity>(),
              1e-6);
  }
  EXPECT_EQ(r.metrics.converged_first, 0);
  EXPECT_EQ(r.metrics.converged_second, -1);
}

TEST(ClosedLoop, RecordsAreConsistent) {
  const CaseStudy& cs = canonical();
  int calls = 0;
  SimulationOptions opt;
  opt.steps = 12;
  opt.on_step = [&](const StepRecord& rec) { EXPECT_EQ(rec.k, calls++); };
  const ClosedLoopResult r = run_closed_loop(cs, canonical_terminals(), opt);
  EXPECT_EQ(calls, 12);
  ASSERT_EQ(r.steps.size(), 12u);
  EXPECT_EQ(r.steps.front().x, initial_state(cs));
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepRecord& rec = r.steps[i];
    EXPECT_EQ(rec.t, rec.k * cs.scenario.mpc.dt);
    EXPECT_EQ(rec.stage_reference, 0);
    EXPECT_EQ(rec.d, cs.steady[0].d);
    const Eigen::VectorXd next = cs.discrete().step(rec.x, rec.u, rec.d);
    const Eigen::VectorXd& stored =
        i + 1 < r.steps.size() ? r.steps[i + 1].x : r.final_state;
    EXPECT_EQ(next, stored);
    EXPECT_LE(rec.state_violation, 1e-8);
    EXPECT_LE(rec.input_violation, 1e-8);
    EXPECT_EQ(rec.input_bound.size(), cs.plant().m());
  }
  EXPECT_EQ(r.states().size(), 13u);
  EXPECT_FALSE(r.steps[0].warm_started);
  EXPECT_TRUE(r.steps[1].warm_started);
}

TEST(ClosedLoop, RejectsNonPositiveLength) {
  SimulationOptions opt;
  opt.steps = 0;
  EXPECT_THROW(run_closed_loop(canonical(), canonical_terminals(), opt),
               SimulationError);
}

TEST(ClosedLoop, TrajectoryFileIsReproducible) {
  const CaseStudy& cs = canonical();
  std::ostringstream a, b;
  write_trajectory_csv(a, cs.plant(), short_run(Variant::kMpc2, 6));
  write_trajectory_csv(b, cs.plant(), short_run(Variant::kMpc2, 6));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("k,t,stage_reference,terminal_reference", 0), 0u);
}

TEST(ClosedLoop, BothVariantsStartIdentically) {
  SimulationOptions opt;
  opt.steps = 4;
  const auto both = run_both(canonical(), canonical_terminals(), opt);
  EXPECT_EQ(both[0].variant, Variant::kMpc1);
  EXPECT_EQ(both[1].variant, Variant::kMpc2);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(both[0].steps[k].u, both[1].steps[k].u);
}

TEST(ConvergenceStep, FindsFirstStepThatStays) {
  const Eigen::VectorXd ref = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  std::vector<Eigen::VectorXd> xs;
  for (double v : {1.0, 0.05, 0.5, 0.05, 0.01, 0.0}) {
    xs.push_back(Eigen::VectorXd::Constant(1, v));
  }
  EXPECT_EQ(convergence_step(xs, ref, one, 0.1, 0, 5), 3);
  EXPECT_EQ(convergence_step(xs, ref, one, 0.1, 4, 5), 4);
  EXPECT_EQ(convergence_step(xs, ref, one, 0.001, 0, 5), 5);
  EXPECT_EQ(convergence_step(xs, ref, one, 1e-6, 0, 4), -1);
  // The scale turns the error into the unit used by the threshold.
  EXPECT_EQ(convergence_step(xs, ref, 0.01 * one, 0.1, 0, 5), 0);
}

TEST(Compare, IdenticalRunsGiveUnitRatio) {
  const CaseStudy& cs = canonical();
  const ClosedLoopResult r = short_run(Variant::kMpc1, 5);
  const Comparison c = compare_runs(cs, r, r);
  EXPECT_EQ(c.overall_ratio, 1.0);
  EXPECT_EQ(c.ratio, Eigen::VectorXd::Ones(cs.plant().layout().num_producers));
}

TEST(Compare, MismatchedRunsThrow) {
  const CaseStudy& cs = canonical();
  const ClosedLoopResult r = short_run(Variant::kMpc1, 5);
  ClosedLoopResult other = r;
  other.steps.pop_back();
  EXPECT_THROW(compare_runs(cs, r, other), SimulationError);
  other = r;
  other.k_step += 1;
  EXPECT_THROW(compare_runs(cs, r, other), SimulationError);
}

TEST(Metrics, MatchRecordedSteps) {
  const CaseStudy& cs = canonical();
  const ClosedLoopResult r = short_run(Variant::kMpc1, 8);
  const ClosedLoopMetrics m = compute_metrics(cs, r);
  double total = 0.0;
  int max_it = 0;
  for (const StepRecord& s : r.steps) {
    total += s.solve_seconds;
    max_it = std::max(max_it, s.sqp_iterations);
  }
  EXPECT_DOUBLE_EQ(m.total_solve_seconds, total);
  EXPECT_EQ(m.max_sqp_iterations, max_it);
  EXPECT_EQ(m.max_mass_error, 0.0);
  // The producers start on their bounds after the initial cold dip.
  EXPECT_FALSE(m.producer_bound_steps.empty());
  for (int k : m.producer_bound_steps) {
    ASSERT_LT(k, 8);
    EXPECT_NE(r.steps[k].input_bound.tail(cs.plant().layout().num_producers)
                  .cwiseAbs()
                  .maxCoeff(),
              0);
  }
}

}  // namespace
}  // namespace dhgmpc
