#include "dhgmpc/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <string>

namespace dhgmpc {

namespace {

Eigen::VectorXi classify_bounds(const Eigen::VectorXd& u,
                                const ConstraintSet& cs, double tol) {
  Eigen::VectorXi out = Eigen::VectorXi::Zero(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double lb = cs.u_lb(i);
    const double ub = cs.u_ub(i);
    if (std::isfinite(lb) && u(i) <= lb + tol * std::max(1.0, std::abs(lb))) {
      out(i) = -1;
    } else if (std::isfinite(ub) &&
               u(i) >= ub - tol * std::max(1.0, std::abs(ub))) {
      out(i) = 1;
    }
  }
  return out;
}

double mass_error(const ThermoHydraulicModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd vm = model.vertex_masses(x);
  const DhgGraph& g = model.network().graph;
  double err = 0.0;
  for (int t = 0; t < g.num_tes(); ++t) {
    err = std::max(err, std::abs(vm(g.hot_vertex(t)) + vm(g.cold_vertex(t)) -
                                 model.params().tes_mass(t)));
  }
  return err;
}

}  // namespace

std::vector<Eigen::VectorXd> ClosedLoopResult::states() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(steps.size() + 1);
  for (const auto& s : steps) out.push_back(s.x);
  if (final_state.size() > 0) out.push_back(final_state);
  return out;
}

ClosedLoopResult run_closed_loop(
    const CaseStudy& cs, const std::array<TerminalIngredients, 2>& terminals,
    const SimulationOptions& options, ClosedLoopResult* partial) {
  const MpcSettings& mpc = cs.scenario.mpc;
  const int k_step = options.k_step.value_or(mpc.k_step);
  const int n_sim = options.steps.value_or(mpc.n_sim);
  if (n_sim < 1) throw SimulationError("number of steps must be positive");

  std::vector<StageReference> tuples;
  for (const SteadyState& ss : cs.steady) tuples.push_back({ss.x, ss.u, ss.d});
  SqpOptions sqp;
  sqp.max_iterations = mpc.sqp_max_iterations;
  sqp.kkt_tolerance = mpc.kkt_tolerance;
  default_scaling(cs.plant().layout(), &sqp);
  MpcController controller(
      cs.discrete(), tuples,
      std::vector<TerminalIngredients>(terminals.begin(), terminals.end()),
      cs.weights.q, cs.weights.r, cs.constraints, mpc.horizon, k_step,
      options.variant, sqp);

  ClosedLoopResult res;
  res.variant = options.variant;
  res.dt = mpc.dt;
  res.horizon = mpc.horizon;
  res.k_step = k_step;
  res.steps.reserve(n_sim);

  Eigen::VectorXd x =
      options.initial_state ? *options.initial_state : initial_state(cs);
  if (x.size() != cs.plant().n()) {
    throw SimulationError("initial state has the wrong dimension");
  }
  for (int k = 0; k < n_sim; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.t = k * mpc.dt;
    rec.x = x;
    rec.d = k < k_step ? cs.steady[0].d : cs.steady[1].d;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.u = controller.step(x, k);
    } catch (const std::exception& e) {
      res.final_state = x;
      res.metrics = compute_metrics(cs, res);
      if (partial != nullptr) *partial = res;
      throw SimulationError("step " + std::to_string(k) + ": " + e.what());
    }
    rec.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const MpcStepInfo& info = controller.last();
    rec.stage_reference = info.schedule.stage.front();
    rec.terminal_reference = info.schedule.terminal;
    rec.objective = info.solution.objective;
    rec.terminal_cost = info.solution.terminal_cost;
    rec.sqp_iterations = info.solution.iterations;
    rec.qp_iterations = info.solution.qp_iterations;
    rec.kkt = info.solution.kkt;
    rec.status = info.solution.status;
    rec.predicted_violation = info.solution.max_violation;
    rec.predicted_defect = info.solution.max_defect;
    rec.warm_started = info.warm_started;
    rec.warm_start_defect = info.warm_start.max_defect;
    rec.warm_start_violation = info.warm_start.max_violation;
    rec.state_violation = cs.constraints.state_violation(x);
    rec.input_violation = cs.constraints.input_violation(rec.u);
    rec.mass_error = mass_error(cs.plant(), x);
    rec.input_bound =
        classify_bounds(rec.u, cs.constraints, options.bound_tolerance);
    x = cs.discrete().step(x, rec.u, rec.d);
    res.steps.push_back(std::move(rec));
    if (options.on_step) options.on_step(res.steps.back());
  }
  res.final_state = x;
  res.metrics = compute_metrics(cs, res);
  return res;
}

std::array<ClosedLoopResult, 2> run_both(
    const CaseStudy& cs, const std::array<TerminalIngredients, 2>& terminals,
    const SimulationOptions& options) {
  SimulationOptions o1 = options;
  o1.variant = Variant::kMpc1;
  SimulationOptions o2 = options;
  o2.variant = Variant::kMpc2;
  auto job = [&cs, &terminals](SimulationOptions o) {
    return run_closed_loop(cs, terminals, o);
  };
  auto f1 = std::async(std::launch::async, job, o1);
  auto f2 = std::async(std::launch::async, job, o2);
  return {f1.get(), f2.get()};
}

int convergence_step(const std::vector<Eigen::VectorXd>& states,
                     const Eigen::VectorXd& reference,
                     const Eigen::VectorXd& scale, double threshold, int begin,
                     int end) {
  end = std::min(end, static_cast<int>(states.size()) - 1);
  int first = -1;
  for (int k = end; k >= std::max(begin, 0); --k) {
    const double err = (states[k] - reference)
                           .cwiseProduct(scale)
                           .lpNorm<Eigen::Infinity>();
    if (!(err < threshold)) break;
    first = k;
  }
  return first;
}

ClosedLoopMetrics compute_metrics(const CaseStudy& cs,
                                  const ClosedLoopResult& result) {
  ClosedLoopMetrics m;
  const int n = static_cast<int>(result.steps.size());
  const int nu = cs.plant().m();
  m.max_input_change = Eigen::VectorXd::Zero(nu);
  if (n == 0) return m;

  const std::vector<Eigen::VectorXd> xs = result.states();
  const Eigen::VectorXd scale = unit_scale(cs.plant());
  const double thr = cs.scenario.mpc.convergence_threshold;
  m.converged_first = convergence_step(xs, cs.steady[0].x, scale, thr, 0,
                                       std::min(result.k_step, n));
  if (result.k_step <= n) {
    m.converged_second =
        convergence_step(xs, cs.steady[1].x, scale, thr, result.k_step, n);
  }

  const StateLayout& lay = cs.plant().layout();
  for (const StepRecord& r : result.steps) {
    m.total_solve_seconds += r.solve_seconds;
    m.max_solve_seconds = std::max(m.max_solve_seconds, r.solve_seconds);
    m.max_sqp_iterations = std::max(m.max_sqp_iterations, r.sqp_iterations);
    if (r.status == SolveStatus::kIterationLimit) ++m.iteration_limit_steps;
    m.max_state_violation = std::max(m.max_state_violation, r.state_violation);
    m.max_input_violation = std::max(m.max_input_violation, r.input_violation);
    m.max_predicted_violation =
        std::max(m.max_predicted_violation, r.predicted_violation);
    m.max_mass_error = std::max(m.max_mass_error, r.mass_error);
    for (int p = 0; p < lay.num_producers; ++p) {
      if (r.input_bound(lay.producer_power(p)) != 0) {
        m.producer_bound_steps.push_back(r.k);
        break;
      }
    }
  }
  m.max_state_violation = std::max(
      m.max_state_violation, cs.constraints.state_violation(result.final_state));
  m.mean_solve_seconds = m.total_solve_seconds / n;

  const int lo = std::max(0, result.k_step - result.horizon);
  const int hi = std::min(n - 1, result.k_step + result.horizon);
  for (int k = lo; k < hi; ++k) {
    m.max_input_change = m.max_input_change.cwiseMax(
        (result.steps[k + 1].u - result.steps[k].u).cwiseAbs());
  }
  return m;
}

Comparison compare_runs(const CaseStudy& cs, const ClosedLoopResult& mpc1,
                        const ClosedLoopResult& mpc2) {
  if (mpc1.steps.size() != mpc2.steps.size() || mpc1.dt != mpc2.dt ||
      mpc1.horizon != mpc2.horizon || mpc1.k_step != mpc2.k_step) {
    throw SimulationError("compare_runs: the runs use different settings");
  }
  const StateLayout& lay = cs.plant().layout();
  if (mpc1.metrics.max_input_change.size() != lay.m() ||
      mpc2.metrics.max_input_change.size() != lay.m()) {
    throw SimulationError("compare_runs: runs belong to a different plant");
  }
  Comparison c;
  const int np = lay.num_producers;
  c.change_first.resize(np);
  c.change_second.resize(np);
  c.ratio.resize(np);
  for (int p = 0; p < np; ++p) {
    c.change_first(p) = mpc1.metrics.max_input_change(lay.producer_power(p));
    c.change_second(p) = mpc2.metrics.max_input_change(lay.producer_power(p));
  }
  auto ratio = [](double a, double b) {
    if (a == b) return 1.0;
    return b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
  };
  for (int p = 0; p < np; ++p) {
    c.ratio(p) = ratio(c.change_first(p), c.change_second(p));
  }
  c.overall_ratio = ratio(c.change_first.maxCoeff(), c.change_second.maxCoeff());
  c.converged_first = mpc1.metrics.converged_second;
  c.converged_second = mpc2.metrics.converged_second;
  c.mean_solve_first = mpc1.metrics.mean_solve_seconds;
  c.mean_solve_second = mpc2.metrics.mean_solve_seconds;
  return c;
}

}  // namespace dhgmpc
