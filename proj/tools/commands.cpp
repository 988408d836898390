#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/csv.hpp"
#include "dhgmpc/simulation.hpp"

namespace dhgmpc::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 2> kSetpointNames = {"I", "II"};

void log(const CommonOptions& c, LogLevel level, const std::string& msg) {
  if (static_cast<int>(c.log) >= static_cast<int>(level)) {
    std::cerr << "dhgmpc: " << msg << '\n';
  }
}

Scenario load(const CommonOptions& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.seed) s.seed = *c.seed;
  return s;
}

std::vector<int> parse_setpoints(const std::string& s) {
  if (s == "I") return {0};
  if (s == "II") return {1};
  if (s == "both") return {0, 1};
  throw UsageError("unknown set point '" + s + "' (expected I, II or both)");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path.string());
  return is;
}

std::string hot_vertex_id(const ThermoHydraulicModel& model, int t) {
  const Network& net = model.network();
  return net.graph.vertices()[net.hot[t]].id;
}

fs::path terminal_file(const std::string& dir, int s, std::string_view suffix) {
  return fs::path(dir) /
         (std::string("terminal_") + kSetpointNames[s] + std::string(suffix));
}

void write_terminal(const CaseStudy& cs, const TerminalIngredients& ti, int s,
                    const DecreaseCheck& dec, const std::string& dir) {
  {
    auto os = open_out(terminal_file(dir, s, "_P.csv"));
    write_matrix_csv(os, ti.p);
  }
  {
    auto os = open_out(terminal_file(dir, s, "_K.csv"));
    write_matrix_csv(os, ti.k);
  }
  {
    auto os = open_out(terminal_file(dir, s, "_xbar.csv"));
    write_matrix_csv(os, ti.x_bar);
  }
  KeyValues kv;
  kv["setpoint"] = kSetpointNames[s];
  kv["alpha"] = format_double(ti.alpha);
  kv["alpha_max"] = format_double(ti.alpha_max);
  kv["dare_residual"] = format_double(ti.dare_residual);
  kv["lyapunov_residual"] = format_double(ti.lyapunov_residual);
  kv["closed_loop_radius"] = format_double(ti.closed_loop_radius);
  kv["max_phi"] = format_double(ti.max_violation);
  kv["decrease_samples"] = std::to_string(dec.samples);
  kv["decrease_worst"] = format_double(dec.worst_decrease);
  kv["decrease_input_violation"] = format_double(dec.worst_input_violation);
  kv["decrease_state_violation"] = format_double(dec.worst_state_violation);
  kv["decrease_passed"] = dec.passed() ? "true" : "false";
  const Eigen::VectorXd box = table_projection(cs, ti);
  for (int t = 0; t < cs.plant().layout().num_hot; ++t) {
    const std::string id = hot_vertex_id(cs.plant(), t);
    kv["delta_m_" + id] = format_double(box(2 * t));
    kv["delta_T_" + id] = format_double(box(2 * t + 1));
  }
  auto os = open_out(terminal_file(dir, s, ".txt"));
  os << "# terminal ingredients for set point " << kSetpointNames[s]
     << "; delta_m in t, delta_T in degC\n";
  write_key_values(os, kv);
}

double parse_number(const KeyValues& kv, const std::string& key,
                    const fs::path& file) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw UsageError(file.string() + ": missing key " + key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw UsageError(file.string() + ": " + key + " is not a number");
  }
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  auto is = open_in(path);
  try {
    return read_matrix_csv(is);
  } catch (const CsvError& e) {
    throw CsvError(path.string() + ": " + e.what());
  }
}

// Stored P, K and alpha; the reference tuple comes from the case study and
// must match the stored x_bar bit for bit, otherwise the files are stale.
TerminalIngredients read_terminal(const CaseStudy& cs, int s,
                                  const std::string& dir) {
  TerminalIngredients ti;
  const int n = cs.plant().n();
  const int m = cs.plant().m();
  ti.p = read_matrix(terminal_file(dir, s, "_P.csv"));
  ti.k = read_matrix(terminal_file(dir, s, "_K.csv"));
  const Eigen::MatrixXd xbar = read_matrix(terminal_file(dir, s, "_xbar.csv"));
  if (ti.p.rows() != n || ti.p.cols() != n || ti.k.rows() != m ||
      ti.k.cols() != n || xbar.rows() != n || xbar.cols() != 1) {
    throw UsageError(std::string("terminal files for set point ") +
                     kSetpointNames[s] + " have the wrong dimensions");
  }
  if (xbar.col(0) != cs.steady[s].x) {
    throw UsageError(std::string("terminal files for set point ") +
                     kSetpointNames[s] +
                     " are stale: stored x_bar differs from the scenario's "
                     "steady state; rerun `dhgmpc terminal`");
  }
  const fs::path txt = terminal_file(dir, s, ".txt");
  auto is = open_in(txt);
  const KeyValues kv = read_key_values(is);
  ti.alpha = parse_number(kv, "alpha", txt);
  ti.alpha_max = parse_number(kv, "alpha_max", txt);
  if (!(ti.alpha > 0.0)) throw UsageError(txt.string() + ": alpha must be positive");
  ti.x_bar = cs.steady[s].x;
  ti.u_bar = cs.steady[s].u;
  ti.d_bar = cs.steady[s].d;
  ti.q = cs.weights.q;
  ti.r = cs.weights.r;
  return ti;
}

std::string step_or_none(int k) { return k < 0 ? "none" : std::to_string(k); }

KeyValues summary(const CaseStudy& cs, const ClosedLoopResult& r) {
  const ClosedLoopMetrics& m = r.metrics;
  const StateLayout& lay = cs.plant().layout();
  const auto us = cs.plant().input_names();
  KeyValues kv;
  kv["variant"] = std::string(to_string(r.variant));
  kv["steps"] = std::to_string(r.steps.size());
  kv["horizon"] = std::to_string(r.horizon);
  kv["dt"] = format_double(r.dt);
  kv["k_step"] = std::to_string(r.k_step);
  kv["converged_setpoint_I_step"] = step_or_none(m.converged_first);
  kv["converged_setpoint_II_step"] = step_or_none(m.converged_second);
  if (m.converged_second >= 0) {
    kv["converged_setpoint_II_hours"] =
        format_double(m.converged_second * r.dt / 3600.0);
  }
  kv["mean_solve_seconds"] = format_double(m.mean_solve_seconds);
  kv["max_solve_seconds"] = format_double(m.max_solve_seconds);
  kv["total_solve_seconds"] = format_double(m.total_solve_seconds);
  kv["max_sqp_iterations"] = std::to_string(m.max_sqp_iterations);
  kv["iteration_limit_steps"] = std::to_string(m.iteration_limit_steps);
  kv["max_state_violation"] = format_double(m.max_state_violation);
  kv["max_input_violation"] = format_double(m.max_input_violation);
  kv["max_predicted_violation"] = format_double(m.max_predicted_violation);
  kv["max_mass_error"] = format_double(m.max_mass_error);
  kv["producer_bound_steps"] = std::to_string(m.producer_bound_steps.size());
  kv["producer_bound_first_step"] = step_or_none(
      m.producer_bound_steps.empty() ? -1 : m.producer_bound_steps.front());
  for (int p = 0; p < lay.num_producers; ++p) {
    const int idx = lay.producer_power(p);
    kv["max_input_change_" + us[idx]] = format_double(m.max_input_change(idx));
  }
  return kv;
}

void write_run_outputs(const CaseStudy& cs, const ClosedLoopResult& r,
                       const std::string& dir) {
  const std::string v(to_string(r.variant));
  {
    auto os = open_out(fs::path(dir) / ("trajectory_" + v + ".csv"));
    write_trajectory_csv(os, cs.plant(), r);
  }
  {
    auto os = open_out(fs::path(dir) / ("timing_" + v + ".csv"));
    write_timing_csv(os, r);
  }
  auto os = open_out(fs::path(dir) / ("summary_" + v + ".txt"));
  write_key_values(os, summary(cs, r));
}

struct RunOutcome {
  ClosedLoopResult result;
  std::string error;  // empty on success
};

RunOutcome run_variant(const CaseStudy& cs,
                       const std::array<TerminalIngredients, 2>& terminals,
                       Variant v, const RunOptions& opt,
                       const CommonOptions& common) {
  SimulationOptions so;
  so.variant = v;
  so.steps = opt.steps;
  const std::string name(to_string(v));
  if (common.log == LogLevel::kDebug) {
    so.on_step = [&common, name](const StepRecord& r) {
      std::ostringstream msg;
      msg << name << " k=" << r.k << " sqp=" << r.sqp_iterations
          << " kkt=" << r.kkt << " t=" << r.solve_seconds << "s";
      log(common, LogLevel::kDebug, msg.str());
    };
  }
  RunOutcome out;
  try {
    out.result = run_closed_loop(cs, terminals, so, &out.result);
  } catch (const SimulationError& e) {
    out.error = e.what();
  }
  return out;
}

void print_comparison(std::ostream& os, const CaseStudy& cs,
                      const Comparison& c) {
  const StateLayout& lay = cs.plant().layout();
  const auto us = cs.plant().input_names();
  KeyValues kv;
  for (int p = 0; p < lay.num_producers; ++p) {
    const std::string& n = us[lay.producer_power(p)];
    kv["max_change_mpc1_" + n] = format_double(c.change_first(p));
    kv["max_change_mpc2_" + n] = format_double(c.change_second(p));
    kv["smoothness_ratio_" + n] = format_double(c.ratio(p));
  }
  kv["smoothness_ratio"] = format_double(c.overall_ratio);
  kv["converged_setpoint_II_step_mpc1"] = step_or_none(c.converged_first);
  kv["converged_setpoint_II_step_mpc2"] = step_or_none(c.converged_second);
  kv["mean_solve_seconds_mpc1"] = format_double(c.mean_solve_first);
  kv["mean_solve_seconds_mpc2"] = format_double(c.mean_solve_second);
  write_key_values(os, kv);
}

}  // namespace

LogLevel log_level_from_env() {
  const char* v = std::getenv("DHGMPC_LOG");
  if (v == nullptr) return LogLevel::kInfo;
  const std::string_view s(v);
  if (s == "quiet" || s == "0") return LogLevel::kQuiet;
  if (s == "debug" || s == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

int cmd_check(const CommonOptions& common, const CheckOptions& opt,
              std::ostream& out) {
  const Scenario sc = load(common);
  // Structure first: it needs no steady state and names the culprit.
  const Network net = analyze_network(sc.graph);
  const StructureCheck sc_check =
      check_stabilizability_structure(net.incidence, net.basis.cycles, net.hot);
  const int nv = net.graph.num_vertices();
  const int ne = net.graph.num_edges();
  const int nh = static_cast<int>(net.hot.size());
  const int nf = net.num_chords();
  const int np = static_cast<int>(net.producers.size());
  const int nc = static_cast<int>(net.consumers.size());
  out << "vertices " << nv << "  edges " << ne << "  storages " << nh << '\n';
  out << "incidence " << net.incidence.rows() << "x" << net.incidence.cols()
      << "  cycle matrix " << net.basis.cycles.rows() << "x"
      << net.basis.cycles.cols() << "  |F| " << nf << '\n';
  out << "reduced graph vertices " << net.reduced.graph.num_vertices() << '\n';
  out << "n " << nh + nv + ne << "  m " << nf + np << "  p " << nc + 1 << '\n';
  out << "hot-layer cycle map rank " << sc_check.rank << " of " << nh << '\n';
  if (!sc_check.satisfied) {
    out << "structure FAIL";
    if (!sc_check.uncovered_hot_rows.empty()) {
      out << ": hot vertices on no cycle:";
      for (int row : sc_check.uncovered_hot_rows) {
        out << ' ' << net.graph.vertices()[net.hot[row]].id;
      }
    } else {
      out << ": hot-layer rows are linearly dependent";
    }
    out << '\n';
    return kNumerical;
  }
  out << "structure PASS\n";

  const CaseStudy cs = build_case_study(sc);
  const double dt = opt.dt.value_or(sc.mpc.dt);
  out << "dt " << dt << '\n';
  bool ok = true;
  for (int s = 0; s < 2; ++s) {
    out << "setpoint " << kSetpointNames[s] << ": ";
    try {
      const StabilizationReport rep = check_stabilization(cs, s, dt);
      const StabilizingFeedback& f = rep.feedback;
      out << "epsilon " << f.epsilon << "  spectral radius "
          << std::setprecision(10) << f.spectral_radius << "  lyapunov "
          << f.lyapunov_max_eig << std::setprecision(6)
          << (f.stable() ? "  PASS" : "  FAIL") << '\n';
      ok = ok && f.stable();
    } catch (const StabilizabilityError& e) {
      out << "FAIL (" << e.what() << ")\n";
      ok = false;
    }
  }
  out << (ok ? "stabilizable\n" : "not stabilizable\n");
  return ok ? kOk : kNumerical;
}

int cmd_steady(const CommonOptions& common, std::ostream& out) {
  const CaseStudy cs = build_case_study(load(common));
  const ThermoHydraulicModel& model = cs.plant();
  const auto xs = model.state_names();
  const auto us = model.input_names();
  const Eigen::VectorXd scale = unit_scale(model);
  bool ok = true;
  for (int s = 0; s < 2; ++s) {
    const SteadyState& ss = cs.steady[s];
    const SteadyStateReport rep =
        validate_steady_state(model, ss, cs.constraints);
    ok = ok && rep.passed();
    out << "setpoint " << kSetpointNames[s] << '\n';
    out << "  residual " << ss.residual << "  iterations " << ss.iterations
        << "  heat loss " << 100.0 * model.heat_loss_fraction(ss.u, ss.d)
        << "%  " << (rep.passed() ? "PASS" : "FAIL") << '\n';
    for (int i = 0; i < model.n(); ++i) {
      out << "  " << xs[i] << " = " << ss.x(i) * scale(i) << '\n';
    }
    for (int i = 0; i < model.m(); ++i) {
      out << "  " << us[i] << " = " << ss.u(i) << '\n';
    }
  }
  return ok ? kOk : kNumerical;
}

int cmd_terminal(const CommonOptions& common,
                 const TerminalCommandOptions& opt, std::ostream& out) {
  const std::vector<int> which = parse_setpoints(opt.setpoint);
  const CaseStudy cs = build_case_study(load(common));
  ensure_dir(opt.out_dir);
  for (int s : which) {
    log(common, LogLevel::kInfo,
        std::string("synthesizing terminal ingredients for set point ") +
            kSetpointNames[s]);
    const TerminalIngredients ti = synthesize_case_terminal(cs, s);
    const DecreaseCheck dec = verify_terminal_decrease(
        cs.discrete(), ti, cs.constraints, 1000, cs.scenario.seed);
    write_terminal(cs, ti, s, dec, opt.out_dir);
    const Eigen::VectorXd box = table_projection(cs, ti);
    out << "setpoint " << kSetpointNames[s] << ": alpha " << ti.alpha
        << " (max " << ti.alpha_max << ")  radius " << ti.closed_loop_radius
        << "  decrease " << (dec.passed() ? "PASS" : "FAIL") << '\n';
    for (int t = 0; t < cs.plant().layout().num_hot; ++t) {
      const std::string id = hot_vertex_id(cs.plant(), t);
      out << "  delta_m_" << id << " " << box(2 * t) << " t  delta_T_" << id
          << " " << box(2 * t + 1) << " degC\n";
    }
    if (!dec.passed()) return kNumerical;
  }
  return kOk;
}

int cmd_run(const CommonOptions& common, const RunOptions& opt,
            std::ostream& out) {
  std::vector<Variant> variants;
  if (opt.variant == "both") {
    variants = {Variant::kMpc1, Variant::kMpc2};
  } else {
    try {
      variants = {parse_variant(opt.variant)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (opt.steps && *opt.steps < 1) throw UsageError("--steps must be positive");

  const CaseStudy cs = build_case_study(load(common));
  ensure_dir(opt.out_dir);
  std::array<TerminalIngredients, 2> terminals;
  const std::string tdir = opt.terminal_dir.empty() ? opt.out_dir : opt.terminal_dir;
  for (int s = 0; s < 2; ++s) {
    if (opt.auto_terminal) {
      log(common, LogLevel::kInfo,
          std::string("synthesizing terminal ingredients for set point ") +
              kSetpointNames[s]);
      terminals[s] = synthesize_case_terminal(cs, s);
    } else {
      terminals[s] = read_terminal(cs, s, tdir);
    }
  }

  // Variants are independent; run them side by side.
  std::vector<std::future<RunOutcome>> jobs;
  for (Variant v : variants) {
    log(common, LogLevel::kInfo, "running " + std::string(to_string(v)));
    jobs.push_back(std::async(std::launch::async, run_variant, std::cref(cs),
                              std::cref(terminals), v, std::cref(opt),
                              std::cref(common)));
  }
  std::vector<ClosedLoopResult> results;
  bool failed = false;
  for (auto& j : jobs) {
    RunOutcome o = j.get();
    write_run_outputs(cs, o.result, opt.out_dir);
    const std::string v(to_string(o.result.variant));
    if (!o.error.empty()) {
      out << v << ": FAILED after " << o.result.steps.size()
          << " steps: " << o.error << '\n';
      failed = true;
      continue;
    }
    const ClosedLoopMetrics& m = o.result.metrics;
    out << v << ": " << o.result.steps.size() << " steps, set point I at "
        << step_or_none(m.converged_first) << ", set point II at "
        << step_or_none(m.converged_second) << ", mean solve "
        << m.mean_solve_seconds << " s, max " << m.max_solve_seconds << " s\n";
    results.push_back(std::move(o.result));
  }
  if (failed) return kNumerical;
  if (results.size() == 2) {
    const Comparison c = compare_runs(cs, results[0], results[1]);
    auto os = open_out(fs::path(opt.out_dir) / "comparison.txt");
    print_comparison(os, cs, c);
    out << "smoothness ratio (mpc1/mpc2) " << c.overall_ratio << '\n';
  }
  return kOk;
}

}  // namespace dhgmpc::cli
