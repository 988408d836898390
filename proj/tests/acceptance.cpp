// Acceptance checks for the canonical scenario. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/controller.hpp"
#include "dhgmpc/csv.hpp"
#include "dhgmpc/simulation.hpp"
#include "support.hpp"

namespace {

using namespace dhgmpc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_eig_sym(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a + a.transpose())
      .eigenvalues()
      .maxCoeff();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name,
               const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name
            << "): " << o.detail << std::endl;
}

Eigen::VectorXd input_scale(const CaseStudy& cs) {
  SqpOptions opt;
  default_scaling(cs.plant().layout(), &opt);
  return opt.u_scale;
}

// Full runs are shared by criteria 8 to 11.
struct Runs {
  std::array<ClosedLoopResult, 2> first;
  std::array<ClosedLoopResult, 2> second;
  double wall_seconds = 0.0;
};

const Runs& full_runs() {
  static const Runs runs = [] {
    Runs r;
    const auto t0 = Clock::now();
    r.first = run_both(testing::canonical(), testing::canonical_terminals(), {});
    r.wall_seconds = seconds_since(t0);
    r.second = run_both(testing::canonical(), testing::canonical_terminals(), {});
    return r;
  }();
  return runs;
}

Outcome structure() {
  const auto t0 = Clock::now();
  const Scenario& sc = testing::canonical_scenario();
  const Network net = analyze_network(sc.graph);
  const StructureCheck chk = check_stabilizability_structure(
      net.incidence, net.basis.cycles, net.hot);
  const CaseStudy cs = build_case_study(sc);
  const double t = seconds_since(t0);
  const ThermoHydraulicModel& m = cs.plant();
  std::ostringstream os;
  os << "n=" << m.n() << " m=" << m.m() << " p=" << m.p()
     << " |F|=" << net.num_chords()
     << " reduced vertices=" << net.reduced.graph.num_vertices()
     << " rank=" << chk.rank << " structure " << (chk.satisfied ? "ok" : "fails")
     << " time=" << t << " s";
  const bool ok = m.n() == 18 && m.m() == 7 && m.p() == 4 &&
                  net.num_chords() == 5 && net.reduced.graph.num_vertices() == 5 &&
                  chk.satisfied && t < 1.0;
  return {ok, os.str()};
}

// The semidefiniteness property concerns steady-state flows q_c: F^T q_c >= 0
// and no net flow into any vertex, storage layers included. Such flows span
// the kernel of (B)_{V_h} F^T cut by the non-negative edge-flow cone.
Outcome semidefinite_block() {
  const auto t0 = Clock::now();
  const ThermoHydraulicModel& model = testing::canonical().plant();
  const Eigen::MatrixXd kernel =
      Eigen::FullPivLU<Eigen::MatrixXd>(model.hot_cycle_map()).kernel();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  int accepted = 0;
  int tried = 0;
  double worst = -std::numeric_limits<double>::infinity();
  while (accepted < 1000) {
    ++tried;
    Eigen::VectorXd w(kernel.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = z(rng);
    Eigen::VectorXd qc = kernel * w;
    const Eigen::VectorXd qe = model.cycle_map() * qc;
    if (qe.minCoeff() < 0.0) continue;
    qc *= 50.0 / qe.maxCoeff();
    ++accepted;
    worst = std::max(worst, max_eig_sym(model.tilde_a(qc)));
  }
  const double t = seconds_since(t0);

  // Unrestricted draws, reported only.
  std::uniform_real_distribution<double> uq(0.0, 50.0);
  double unrestricted = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < 1000; ++s) {
    Eigen::VectorXd qc(model.layout().num_chords);
    for (Eigen::Index i = 0; i < qc.size(); ++i) qc(i) = uq(rng);
    unrestricted = std::max(unrestricted, max_eig_sym(model.tilde_a(qc)));
  }
  std::ostringstream os;
  os << "1000 steady-state flows (" << tried << " draws), max eig="
     << worst << " time=" << t
     << " s; note: unbalanced q_c >= 0 reach max eig=" << unrestricted;
  return {worst <= 1e-9 && t < 5.0, os.str()};
}

Outcome jacobians() {
  const CaseStudy& cs = testing::canonical();
  const ThermoHydraulicModel& model = cs.plant();
  const double dt = cs.scenario.mpc.dt;
  const Eigen::VectorXd xs = unit_scale(model).cwiseInverse();
  const Eigen::VectorXd us = input_scale(cs);
  double worst = 0.0;
  for (int s = 0; s < 2; ++s) {
    const SteadyState& ss = cs.steady[s];
    const LinearizedModel lin = linearize(model, ss, dt);
    const Eigen::MatrixXd fa = testing::central_difference(
        [&](const Eigen::VectorXd& x) { return model.euler_step(x, ss.u, ss.d, dt); },
        ss.x, xs, 1e-6);
    const Eigen::MatrixXd fb = testing::central_difference(
        [&](const Eigen::VectorXd& u) { return model.euler_step(ss.x, u, ss.d, dt); },
        ss.u, us, 1e-6);
    const Eigen::MatrixXd row = xs.cwiseInverse().asDiagonal();
    worst = std::max(worst, testing::relative_error(row * lin.a * xs.asDiagonal(),
                                                    row * fa * xs.asDiagonal()));
    worst = std::max(worst, testing::relative_error(row * lin.b * us.asDiagonal(),
                                                    row * fb * us.asDiagonal()));
  }
  std::ostringstream os;
  os << "max relative error=" << worst;
  return {worst < 1e-6, os.str()};
}

Outcome stabilizability() {
  const CaseStudy& cs = testing::canonical();
  std::ostringstream os;
  bool ok = true;
  for (int s = 0; s < 2; ++s) {
    const StabilizationReport r = check_stabilization(cs, s, 60.0);
    ok = ok && r.feedback.spectral_radius < 1.0 && r.feedback.lyapunov_max_eig < 0.0;
    os << (s == 0 ? "I" : "II") << ": eps=" << r.feedback.epsilon
       << " radius=" << r.feedback.spectral_radius
       << " lyapunov=" << r.feedback.lyapunov_max_eig << "; ";
  }
  bool negative = false;
  try {
    check_stabilization(cs, 0, 1e6);
  } catch (const StabilizabilityError&) {
    negative = true;
  }
  os << "dt=1e6 " << (negative ? "rejected" : "accepted");
  return {ok && negative, os.str()};
}

Outcome steady_states() {
  const CaseStudy& cs = testing::canonical();
  const ThermoHydraulicModel& model = cs.plant();
  const double pins[2][2] = {{45.0, 75.0}, {46.0, 77.0}};
  const DhgGraph& g = model.network().graph;
  bool ok = true;
  std::ostringstream os;
  for (int s = 0; s < 2; ++s) {
    const SteadyState& ss = cs.steady[s];
    const double t1 = ss.x(model.layout().vertex_temperature(g.vertex_index("v1")));
    const double t6 = ss.x(model.layout().vertex_temperature(g.vertex_index("v6")));
    const double loss = model.heat_loss_fraction(ss.u, ss.d);
    ok = ok && ss.residual <= 1e-8 && t1 == pins[s][0] && t6 == pins[s][1] &&
         loss >= 0.05 && loss <= 0.12;
    os << (s == 0 ? "I" : "II") << ": residual=" << ss.residual << " T_v1=" << t1
       << " T_v6=" << t6 << " loss=" << 100.0 * loss << "%; ";
  }
  return {ok, os.str()};
}

Outcome terminal() {
  const CaseStudy& cs = testing::canonical();
  const double table[2][4] = {{0.75, 2.05, 0.45, 0.4}, {0.75, 3.3, 0.45, 2.07}};
  bool ok = true;
  std::ostringstream os;
  for (int s = 0; s < 2; ++s) {
    const TerminalIngredients& ti = testing::canonical_terminals()[s];
    const DecreaseCheck chk =
        verify_terminal_decrease(cs.discrete(), ti, cs.constraints, 1000, 99 + s);
    const Eigen::VectorXd proj = table_projection(cs, ti);
    double worst_factor = 1.0;
    for (int i = 0; i < 4; ++i) {
      worst_factor = std::max(worst_factor, std::max(proj(i) / table[s][i],
                                                     table[s][i] / proj(i)));
    }
    ok = ok && ti.dare_residual <= 1e-10 && ti.lyapunov_residual <= 1e-10 &&
         ti.alpha > 0.0 && chk.passed(1e-9) && worst_factor <= 10.0;
    os << (s == 0 ? "I" : "II") << ": dare=" << ti.dare_residual
       << " lyap=" << ti.lyapunov_residual << " alpha=" << ti.alpha
       << " decrease=" << chk.worst_decrease
       << " input_viol=" << chk.worst_input_violation << " box=(" << proj(0)
       << " t, " << proj(1) << " C, " << proj(2) << " t, " << proj(3)
       << " C) vs (" << table[s][0] << ", " << table[s][1] << ", " << table[s][2]
       << ", " << table[s][3] << ") factor=" << worst_factor << "; ";
  }
  return {ok, os.str()};
}

Outcome lq_equivalence() {
  const CaseStudy& cs = testing::canonical();
  const SteadyState& ss = cs.steady[0];
  const LinearizedModel lin = linearize(cs.plant(), ss, cs.scenario.mpc.dt);
  const AffineModel plant(lin.a, lin.b, ss.x, ss.u);
  const DareSolution dare = solve_dare(lin.a, lin.b, cs.weights.q, cs.weights.r);
  TerminalIngredients ti;
  ti.p = dare.p;
  ti.k = dare.k;
  ti.alpha = 1e12;
  ti.x_bar = ss.x;
  ti.u_bar = ss.u;
  ConstraintSet open;
  open.x_lb = Eigen::VectorXd::Constant(cs.plant().n(), -1e9);
  open.x_ub = -open.x_lb;
  open.u_lb = Eigen::VectorXd::Constant(cs.plant().m(), -1e9);
  open.u_ub = -open.u_lb;
  open.u_lin = Eigen::MatrixXd::Zero(0, cs.plant().m());
  const Eigen::VectorXd e = initial_state(cs) - ss.x;
  const int horizon = cs.scenario.mpc.horizon;
  Schedule sched;
  sched.stage.assign(horizon, 0);
  const OcpProblem ocp = build_ocp(plant, ss.x + e, sched, {{ss.x, ss.u, ss.d}},
                                   {&ti}, cs.weights.q, cs.weights.r, open);
  SqpOptions opt;
  default_scaling(cs.plant().layout(), &opt);
  const OcpSolution sol = solve_ocp(ocp, nullptr, opt);
  const std::vector<Eigen::VectorXd> ref = testing::riccati_lq(
      lin.a, lin.b, cs.weights.q, cs.weights.r, dare.p, e, horizon);
  double worst = 0.0;
  for (int k = 0; k < horizon; ++k) {
    const Eigen::VectorXd got = (sol.u[k] - ss.u).cwiseQuotient(opt.u_scale);
    const Eigen::VectorXd want = ref[k].cwiseQuotient(opt.u_scale);
    worst = std::max(worst, (got - want).lpNorm<Eigen::Infinity>() /
                                std::max(1.0, want.lpNorm<Eigen::Infinity>()));
  }
  std::ostringstream os;
  os << "N=" << horizon << " max relative input error=" << worst
     << " (sqp iterations " << sol.iterations << ")";
  return {sol.status == SolveStatus::kConverged && worst <= 1e-6, os.str()};
}

Outcome closed_loop_first() {
  const CaseStudy& cs = testing::canonical();
  const Runs& runs = full_runs();
  const ClosedLoopResult& r = runs.first[0];
  const ClosedLoopMetrics& m = r.metrics;
  const double dt = cs.scenario.mpc.dt;
  const bool feasible = m.max_state_violation <= 1e-8 &&
                        m.max_input_violation <= 1e-8 &&
                        m.max_predicted_violation <= 1e-8;
  const bool first = m.converged_first >= 0 && m.converged_first < r.k_step;
  const bool second =
      m.converged_second >= 0 && m.converged_second * dt < 2.75 * 3600.0;
  std::ostringstream os;
  os << static_cast<int>(r.steps.size()) << " steps, set point I at k="
     << m.converged_first << ", set point II at k=" << m.converged_second << " ("
     << m.converged_second * dt / 3600.0 << " h), violations state="
     << m.max_state_violation << " input=" << m.max_input_violation
     << " predicted=" << m.max_predicted_violation
     << ", solve mean=" << m.mean_solve_seconds << " s max=" << m.max_solve_seconds
     << " s, wall=" << runs.wall_seconds << " s, iteration-limit steps="
     << m.iteration_limit_steps;
  const bool ok = static_cast<int>(r.steps.size()) == cs.scenario.mpc.n_sim &&
                  feasible && first && second && m.max_solve_seconds <= 2.0 &&
                  runs.wall_seconds <= 360.0;
  return {ok, os.str()};
}

Outcome closed_loop_second() {
  const CaseStudy& cs = testing::canonical();
  const Runs& runs = full_runs();
  const Comparison cmp = compare_runs(cs, runs.first[0], runs.first[1]);

  // Onset from the first steady state.
  SimulationOptions opt;
  opt.variant = Variant::kMpc2;
  opt.initial_state = cs.steady[0].x;
  opt.steps = cs.scenario.mpc.k_step - cs.scenario.mpc.horizon + 5;
  const ClosedLoopResult onset_run =
      run_closed_loop(cs, testing::canonical_terminals(), opt);
  const Eigen::VectorXd us = input_scale(cs);
  int onset = -1;
  for (const StepRecord& rec : onset_run.steps) {
    if ((rec.u - cs.steady[0].u).cwiseQuotient(us).lpNorm<Eigen::Infinity>() >
        1e-3) {
      onset = rec.k;
      break;
    }
  }
  const int expected = cs.scenario.mpc.k_step - cs.scenario.mpc.horizon;
  const bool onset_ok = std::abs(onset - expected) <= 1;
  const bool converge_ok = cmp.converged_second >= 0 &&
                           cmp.converged_first >= 0 &&
                           cmp.converged_second <= cmp.converged_first;
  const bool smooth_ok = cmp.overall_ratio >= 1.0;
  std::ostringstream os;
  os << "onset k=" << onset << " (expected " << expected << "), set point II at k="
     << cmp.converged_second << " vs MPC 1 k=" << cmp.converged_first
     << ", heat-flow change ratio=" << cmp.overall_ratio << " (per producer";
  const auto names = cs.plant().input_names();
  for (int p = 0; p < cmp.ratio.size(); ++p) {
    os << " " << names[cs.plant().layout().producer_power(p)] << "="
       << cmp.ratio(p);
  }
  os << "), max solve=" << runs.first[1].metrics.max_solve_seconds << " s";
  return {onset_ok && converge_ok && smooth_ok, os.str()};
}

Outcome constraints() {
  const CaseStudy& cs = testing::canonical();
  const ClosedLoopResult& r = full_runs().first[0];
  const ClosedLoopMetrics& m = r.metrics;
  const double dt = cs.scenario.mpc.dt;
  int late_bound = -1;
  for (int k : m.producer_bound_steps) {
    if (k * dt >= 1.5 * 3600.0) {
      late_bound = k;
      break;
    }
  }
  double mass = 0.0;
  for (const Eigen::VectorXd& x : r.states()) {
    const Eigen::VectorXd vm = cs.plant().vertex_masses(x);
    const DhgGraph& g = cs.plant().network().graph;
    for (int t = 0; t < g.num_tes(); ++t) {
      mass = std::max(mass, std::abs(vm(g.hot_vertex(t)) + vm(g.cold_vertex(t)) -
                                     cs.plant().params().tes_mass(t)));
    }
  }
  std::ostringstream os;
  os << "producer bound steps:";
  for (int k : m.producer_bound_steps) os << " " << k;
  os << "; first at t >= 1.5 h: k=" << late_bound
     << ", max violation=" << std::max(m.max_state_violation, m.max_input_violation)
     << ", max mass error=" << mass << " kg over " << r.states().size()
     << " states";
  const bool ok = late_bound >= 0 && m.max_state_violation <= 1e-8 &&
                  m.max_input_violation <= 1e-8 && mass == 0.0 &&
                  m.max_mass_error == 0.0;
  return {ok, os.str()};
}

Outcome determinism() {
  const CaseStudy& cs = testing::canonical();
  const Runs& runs = full_runs();
  bool ok = true;
  std::ostringstream os;
  for (int v = 0; v < 2; ++v) {
    std::ostringstream a, b;
    write_trajectory_csv(a, cs.plant(), runs.first[v]);
    write_trajectory_csv(b, cs.plant(), runs.second[v]);
    const bool same = a.str() == b.str();
    ok = ok && same && !a.str().empty();
    os << to_string(runs.first[v].variant) << " " << a.str().size() << " bytes "
       << (same ? "identical" : "differ") << "; ";
  }
  return {ok, os.str()};
}

}  // namespace

int main() {
  std::cout.precision(6);
  criterion(1, "structure", structure);
  criterion(2, "semidefinite temperature block", semidefinite_block);
  criterion(3, "Jacobian oracle", jacobians);
  criterion(4, "stabilizability", stabilizability);
  criterion(5, "steady states", steady_states);
  criterion(6, "terminal ingredients", terminal);
  criterion(7, "LQ equivalence", lq_equivalence);
  criterion(8, "closed loop MPC 1", closed_loop_first);
  criterion(9, "closed loop MPC 2", closed_loop_second);
  criterion(10, "constraints", constraints);
  criterion(11, "determinism", determinism);
  std::cout << (failures == 0 ? "all criteria passed" : "some criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
