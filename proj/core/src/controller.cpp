#include "dhgmpc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dhgmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd scale_or_ones(const Eigen::VectorXd& s, Eigen::Index n) {
  if (s.size() == 0) return Eigen::VectorXd::Ones(n);
  if (s.size() != n || (s.array() <= 0.0).any()) {
    throw std::invalid_argument("SQP scaling has the wrong size or sign");
  }
  return s;
}

// Builds the Gauss-Newton QP in scaled increments around (x, u). `f` holds
// f(x_k, u_k, d_k) for every stage.
StructuredQp build_qp(const OcpProblem& ocp,
                      const std::vector<Eigen::VectorXd>& x,
                      const std::vector<Eigen::VectorXd>& u,
                      const std::vector<Eigen::VectorXd>& f,
                      const std::vector<Eigen::MatrixXd>& a,
                      const std::vector<Eigen::MatrixXd>& b,
                      const Eigen::VectorXd& dx, const Eigen::VectorXd& du,
                      double terminal_multiplier) {
  const int N = ocp.horizon();
  const Eigen::Index n = dx.size();
  const Eigen::Index m = du.size();
  const ConstraintSet& cs = ocp.constraints;
  const int nl = cs.num_linear();
  const Eigen::MatrixXd q_hat = 2.0 * dx.asDiagonal() * ocp.q * dx.asDiagonal();
  const Eigen::MatrixXd r_hat = 2.0 * du.asDiagonal() * ocp.r * du.asDiagonal();
  const Eigen::MatrixXd lin_hat = cs.u_lin * du.asDiagonal();
  const Eigen::VectorXd inv_dx = dx.cwiseInverse();

  StructuredQp qp;
  qp.x0 = Eigen::VectorXd::Zero(n);
  qp.stages.resize(N + 1);
  for (int k = 0; k < N; ++k) {
    QpStage& st = qp.stages[k];
    const StageReference& ref = ocp.stages[k];
    st.q_xx = q_hat;
    st.q_x = 2.0 * dx.cwiseProduct(ocp.q * (x[k] - ref.x));
    st.q_uu = r_hat;
    st.q_u = 2.0 * du.cwiseProduct(ocp.r * (u[k] - ref.u));
    st.a = inv_dx.asDiagonal() * a[k] * dx.asDiagonal();
    st.b = inv_dx.asDiagonal() * b[k] * du.asDiagonal();
    st.c = (f[k] - x[k + 1]).cwiseProduct(inv_dx);
    st.x_lb = (cs.x_lb - x[k]).cwiseProduct(inv_dx);
    st.x_ub = (cs.x_ub - x[k]).cwiseProduct(inv_dx);
    st.u_lb = (cs.u_lb - u[k]).cwiseQuotient(du);
    st.u_ub = (cs.u_ub - u[k]).cwiseQuotient(du);
    if (nl > 0) {
      const Eigen::VectorXd cu = cs.u_lin * u[k];
      st.cx = Eigen::MatrixXd::Zero(2 * nl, n);
      st.cu.resize(2 * nl, m);
      st.cu.topRows(nl) = lin_hat;
      st.cu.bottomRows(nl) = -lin_hat;
      st.g.resize(2 * nl);
      st.g.head(nl) = cs.lin_ub - cu;
      st.g.tail(nl) = cu - cs.lin_lb;
    }
  }
  QpStage& last = qp.stages[N];
  const TerminalSet& ts = ocp.terminal;
  const Eigen::VectorXd e = x[N] - ts.x_bar;
  const Eigen::VectorXd pe = ts.p * e;
  last.q_xx = 2.0 * (1.0 + terminal_multiplier) * dx.asDiagonal() * ts.p *
              dx.asDiagonal();
  last.q_x = 2.0 * dx.cwiseProduct(pe);
  last.x_lb = (cs.x_lb - x[N]).cwiseProduct(inv_dx);
  last.x_ub = (cs.x_ub - x[N]).cwiseProduct(inv_dx);
  last.cx = (2.0 * dx.cwiseProduct(pe)).transpose();
  last.g = Eigen::VectorXd::Constant(1, ts.alpha - e.dot(pe));
  return qp;
}

struct MeritTerms {
  double objective = 0.0;
  double violation = 0.0;  // scaled l1 norm
};

MeritTerms merit_terms(const OcpProblem& ocp,
                       const std::vector<Eigen::VectorXd>& x,
                       const std::vector<Eigen::VectorXd>& u,
                       const Eigen::VectorXd& dx, const Eigen::VectorXd& du,
                       std::vector<Eigen::VectorXd>* f) {
  const int N = ocp.horizon();
  const ConstraintSet& cs = ocp.constraints;
  MeritTerms mt;
  f->resize(N);
  for (int k = 0; k < N; ++k) {
    (*f)[k] = ocp.model->step(x[k], u[k], ocp.stages[k].d);
    mt.violation += ((*f)[k] - x[k + 1]).cwiseQuotient(dx).lpNorm<1>();
    mt.objective += stage_cost(ocp, k, x[k], u[k]);
    mt.violation += ((cs.u_lb - u[k]).cwiseMax(0.0) +
                     (u[k] - cs.u_ub).cwiseMax(0.0))
                        .cwiseQuotient(du)
                        .sum();
    if (cs.num_linear() > 0) {
      const Eigen::VectorXd cu = cs.u_lin * u[k];
      mt.violation += ((cs.lin_lb - cu).cwiseMax(0.0) +
                       (cu - cs.lin_ub).cwiseMax(0.0))
                          .sum();
    }
  }
  for (int k = 1; k <= N; ++k) {
    mt.violation += ((cs.x_lb - x[k]).cwiseMax(0.0) +
                     (x[k] - cs.x_ub).cwiseMax(0.0))
                        .cwiseQuotient(dx)
                        .sum();
  }
  const Eigen::VectorXd e = x[N] - ocp.terminal.x_bar;
  const double cp = e.dot(ocp.terminal.p * e);
  mt.objective += cp;
  mt.violation += std::max(0.0, cp - ocp.terminal.alpha);
  return mt;
}

double max_abs(const std::vector<Eigen::VectorXd>& v) {
  double out = 0.0;
  for (const auto& e : v) {
    if (e.size() > 0) out = std::max(out, e.lpNorm<Eigen::Infinity>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Variant v) {
  return v == Variant::kMpc1 ? "mpc1" : "mpc2";
}

Variant parse_variant(std::string_view text) {
  if (text == "mpc1") return Variant::kMpc1;
  if (text == "mpc2") return Variant::kMpc2;
  throw std::invalid_argument("unknown variant '" + std::string(text) +
                              "' (expected mpc1 or mpc2)");
}

Schedule reference_schedule(Variant variant, int k, int horizon, int k_step) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (k_step <= horizon) {
    throw std::invalid_argument("k_step must exceed the horizon");
  }
  Schedule s;
  s.stage.resize(horizon);
  if (variant == Variant::kMpc1) {
    const int idx = k < k_step ? 0 : 1;
    std::fill(s.stage.begin(), s.stage.end(), idx);
    s.terminal = idx;
  } else {
    for (int i = 0; i < horizon; ++i) s.stage[i] = k + i < k_step ? 0 : 1;
    s.terminal = k < k_step - horizon ? 0 : 1;
  }
  return s;
}

TerminalSet terminal_set(const TerminalIngredients& ti) {
  return {ti.p, ti.alpha, ti.x_bar, ti.u_bar, ti.k};
}

OcpProblem build_ocp(const DiscreteModel& model, const Eigen::VectorXd& x0,
                     const Schedule& schedule,
                     const std::vector<StageReference>& tuples,
                     const std::vector<const TerminalIngredients*>& terminals,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     const ConstraintSet& constraints) {
  if (schedule.stage.empty()) throw ControllerError("horizon must be >= 1");
  const int n = model.state_dim();
  const int m = model.input_dim();
  if (x0.size() != n || q.rows() != n || q.cols() != n || r.rows() != m ||
      r.cols() != m) {
    throw ControllerError("build_ocp: dimension mismatch");
  }
  OcpProblem ocp;
  ocp.model = &model;
  ocp.x0 = x0;
  ocp.q = q;
  ocp.r = r;
  ocp.constraints = constraints;
  for (int idx : schedule.stage) {
    if (idx < 0 || idx >= static_cast<int>(tuples.size())) {
      throw ControllerError("build_ocp: schedule refers to a missing tuple");
    }
    ocp.stages.push_back(tuples[idx]);
  }
  if (schedule.terminal < 0 ||
      schedule.terminal >= static_cast<int>(terminals.size()) ||
      terminals[schedule.terminal] == nullptr) {
    throw ControllerError("build_ocp: terminal ingredients missing for the "
                          "reference at the end of the horizon");
  }
  ocp.terminal = terminal_set(*terminals[schedule.terminal]);
  return ocp;
}

void default_scaling(const StateLayout& layout, SqpOptions* options) {
  options->x_scale = Eigen::VectorXd::Ones(layout.n());
  options->x_scale.head(layout.num_hot).setConstant(1000.0);
  options->u_scale = Eigen::VectorXd::Ones(layout.m());
  options->u_scale.tail(layout.num_producers).setConstant(1000.0);
}

double stage_cost(const OcpProblem& ocp, int k, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u) {
  const Eigen::VectorXd ex = x - ocp.stages[k].x;
  const Eigen::VectorXd eu = u - ocp.stages[k].u;
  return ex.dot(ocp.q * ex) + eu.dot(ocp.r * eu);
}

double ocp_objective(const OcpProblem& ocp,
                     const std::vector<Eigen::VectorXd>& x,
                     const std::vector<Eigen::VectorXd>& u) {
  const int N = ocp.horizon();
  double j = 0.0;
  for (int k = 0; k < N; ++k) j += stage_cost(ocp, k, x[k], u[k]);
  const Eigen::VectorXd e = x[N] - ocp.terminal.x_bar;
  return j + e.dot(ocp.terminal.p * e);
}

TrajectoryCheck check_trajectory(const OcpProblem& ocp,
                                 const std::vector<Eigen::VectorXd>& x,
                                 const std::vector<Eigen::VectorXd>& u) {
  const int N = ocp.horizon();
  TrajectoryCheck tc;
  for (int k = 0; k < N; ++k) {
    try {
      tc.max_defect = std::max(
          tc.max_defect, (ocp.model->step(x[k], u[k], ocp.stages[k].d) - x[k + 1])
                             .lpNorm<Eigen::Infinity>());
    } catch (const SingularMassError&) {
      tc.max_defect = kInf;
    }
    tc.max_violation =
        std::max(tc.max_violation, ocp.constraints.input_violation(u[k]));
  }
  for (int k = 1; k <= N; ++k) {
    tc.max_violation =
        std::max(tc.max_violation, ocp.constraints.state_violation(x[k]));
  }
  const Eigen::VectorXd e = x[N] - ocp.terminal.x_bar;
  tc.max_violation =
      std::max(tc.max_violation, e.dot(ocp.terminal.p * e) - ocp.terminal.alpha);
  return tc;
}

OcpGuess cold_start(const OcpProblem& ocp) {
  const int N = ocp.horizon();
  OcpGuess g;
  g.x.assign(N + 1, ocp.stages[0].x);
  g.x[0] = ocp.x0;
  g.u.assign(N, ocp.stages[0].u);
  return g;
}

OcpGuess shift_solution(const OcpSolution& prev, const OcpProblem& next) {
  const int N = next.horizon();
  if (static_cast<int>(prev.u.size()) != N) {
    throw ControllerError("shift_solution: horizon changed");
  }
  OcpGuess g;
  g.x.assign(prev.x.begin() + 1, prev.x.end());
  g.x[0] = next.x0;
  g.u.assign(prev.u.begin() + 1, prev.u.end());
  const TerminalSet& ts = next.terminal;
  Eigen::VectorXd tail = ts.u_bar - ts.k * (g.x[N - 1] - ts.x_bar);
  tail = tail.cwiseMax(next.constraints.u_lb).cwiseMin(next.constraints.u_ub);
  g.u.push_back(tail);
  try {
    g.x.push_back(next.model->step(g.x[N - 1], tail, next.stages[N - 1].d));
  } catch (const SingularMassError&) {
    g.x.push_back(g.x[N - 1]);
  }
  if (prev.pi.size() == static_cast<std::size_t>(N)) {
    g.pi.assign(prev.pi.begin() + 1, prev.pi.end());
    g.pi.push_back(prev.pi.back());
  }
  if (prev.lam.size() == static_cast<std::size_t>(N + 1)) {
    // Stage 0 carries no state rows, so its multipliers are rebuilt.
    g.lam.assign(prev.lam.begin() + 1, prev.lam.end());
    g.lam.push_back(prev.lam.back());
    g.lam[0].resize(0);
  }
  return g;
}

OcpSolution solve_ocp(const OcpProblem& ocp, const OcpGuess* guess,
                      const SqpOptions& options) {
  const int N = ocp.horizon();
  const int n = ocp.model->state_dim();
  const int m = ocp.model->input_dim();
  const Eigen::VectorXd dx = scale_or_ones(options.x_scale, n);
  const Eigen::VectorXd du = scale_or_ones(options.u_scale, m);

  OcpGuess g = guess != nullptr ? *guess : cold_start(ocp);
  if (static_cast<int>(g.x.size()) != N + 1 ||
      static_cast<int>(g.u.size()) != N) {
    throw ControllerError("solve_ocp: guess does not match the horizon");
  }
  std::vector<Eigen::VectorXd> x = std::move(g.x);
  std::vector<Eigen::VectorXd> u = std::move(g.u);
  x[0] = ocp.x0;

  std::vector<Eigen::VectorXd> f;
  MeritTerms mt;
  try {
    mt = merit_terms(ocp, x, u, dx, du, &f);
  } catch (const SingularMassError& e) {
    throw ControllerError(std::string("solve_ocp: initial guess leaves the "
                                      "model domain: ") + e.what());
  }

  std::vector<Eigen::VectorXd> pi = std::move(g.pi);
  std::vector<Eigen::VectorXd> lam = std::move(g.lam);
  std::vector<Eigen::MatrixXd> a(N);
  std::vector<Eigen::MatrixXd> b(N);
  double nu = 0.0;
  OcpSolution sol;
  sol.status = SolveStatus::kIterationLimit;
  const std::vector<Eigen::VectorXd> zeros_x(N + 1, Eigen::VectorXd::Zero(n));
  const std::vector<Eigen::VectorXd> zeros_u(N, Eigen::VectorXd::Zero(m));

  for (int iter = 0;; ++iter) {
    for (int k = 0; k < N; ++k) {
      ocp.model->linearize(x[k], u[k], ocp.stages[k].d, &a[k], &b[k]);
    }
    double mu_t = 0.0;
    if (lam.size() == static_cast<std::size_t>(N + 1) && lam[N].size() > 0) {
      mu_t = std::max(0.0, lam[N](lam[N].size() - 1));
    }
    const StructuredQp qp = build_qp(ocp, x, u, f, a, b, dx, du, mu_t);

    bool multipliers_ok = pi.size() == static_cast<std::size_t>(N) &&
                          lam.size() == static_cast<std::size_t>(N + 1);
    for (int k = 0; multipliers_ok && k <= N; ++k) {
      multipliers_ok = lam[k].size() == qp_stage_rows(qp, k) &&
                       (k == N || pi[k].size() == n);
    }
    if (!multipliers_ok) {
      pi.assign(N, Eigen::VectorXd::Zero(n));
      lam.resize(N + 1);
      for (int k = 0; k <= N; ++k) {
        lam[k] = Eigen::VectorXd::Zero(qp_stage_rows(qp, k));
      }
    }
    sol.kkt = evaluate_qp_kkt(qp, zeros_x, zeros_u, pi, lam).max();
    sol.iterations = iter;
    if (sol.kkt <= options.kkt_tolerance) {
      sol.status = SolveStatus::kConverged;
      break;
    }
    if (iter >= options.max_iterations) break;

    const QpSolution step = solve_structured_qp(qp, options.qp);
    sol.qp_iterations += step.iterations;
    if (!step.converged) {
      throw ControllerError(
          "solve_ocp: QP subproblem did not converge (residual " +
          std::to_string(step.residual) +
          "); the linearized constraints may be infeasible");
    }
    nu = std::max(nu, 1.1 * std::max(max_abs(step.pi), max_abs(step.lam)) + 1e-8);

    double slope = -nu * mt.violation;
    for (int k = 0; k < N; ++k) {
      slope += qp.stages[k].q_x.dot(step.x[k]) + qp.stages[k].q_u.dot(step.u[k]);
    }
    slope += qp.stages[N].q_x.dot(step.x[N]);
    const double merit0 = mt.objective + nu * mt.violation;

    double t = 1.0;
    bool accepted = false;
    std::vector<Eigen::VectorXd> xt(N + 1), ut(N), ft;
    MeritTerms mtt;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      xt[0] = x[0];
      for (int k = 1; k <= N; ++k) {
        xt[k] = x[k] + t * dx.cwiseProduct(step.x[k]);
      }
      for (int k = 0; k < N; ++k) ut[k] = u[k] + t * du.cwiseProduct(step.u[k]);
      try {
        mtt = merit_terms(ocp, xt, ut, dx, du, &ft);
      } catch (const SingularMassError&) {
        continue;
      }
      const double merit = mtt.objective + nu * mtt.violation;
      // Rounding noise in the merit is not treated as an increase.
      const double noise = 1e-13 * std::max(1.0, std::abs(merit0));
      if (merit <= merit0 + 1e-4 * t * std::min(slope, 0.0) + noise) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent left at rounding level
    x = std::move(xt);
    u = std::move(ut);
    f = std::move(ft);
    mt = mtt;
    xt.assign(N + 1, Eigen::VectorXd());
    ut.assign(N, Eigen::VectorXd());
    pi = step.pi;
    lam = step.lam;
  }

  sol.x = std::move(x);
  sol.u = std::move(u);
  sol.pi = std::move(pi);
  sol.lam = std::move(lam);
  sol.objective = ocp_objective(ocp, sol.x, sol.u);
  const TrajectoryCheck tc = check_trajectory(ocp, sol.x, sol.u);
  sol.max_defect = tc.max_defect;
  sol.max_violation = tc.max_violation;
  sol.terminal_cost = (sol.x[N] - ocp.terminal.x_bar)
                          .dot(ocp.terminal.p * (sol.x[N] - ocp.terminal.x_bar)) /
                      ocp.terminal.alpha;
  return sol;
}

MpcController::MpcController(const DiscreteModel& model,
                             std::vector<StageReference> tuples,
                             std::vector<TerminalIngredients> terminals,
                             Eigen::MatrixXd q, Eigen::MatrixXd r,
                             ConstraintSet constraints, int horizon,
                             int k_step, Variant variant, SqpOptions options)
    : model_(&model),
      tuples_(std::move(tuples)),
      terminals_(std::move(terminals)),
      q_(std::move(q)),
      r_(std::move(r)),
      constraints_(std::move(constraints)),
      horizon_(horizon),
      k_step_(k_step),
      variant_(variant),
      options_(std::move(options)) {
  if (tuples_.size() != terminals_.size() || tuples_.empty()) {
    throw ControllerError("MpcController: one terminal set per tuple expected");
  }
  reference_schedule(variant_, 0, horizon_, k_step_);  // validates N, k_step
}

Eigen::VectorXd MpcController::step(const Eigen::VectorXd& x, int k) {
  std::vector<const TerminalIngredients*> terms;
  for (const auto& t : terminals_) terms.push_back(&t);
  last_ = MpcStepInfo{};
  last_.schedule = reference_schedule(variant_, k, horizon_, k_step_);
  problem_ = build_ocp(*model_, x, last_.schedule, tuples_, terms, q_, r_,
                       constraints_);
  OcpGuess guess;
  if (previous_) {
    guess = shift_solution(*previous_, problem_);
    last_.warm_start = check_trajectory(problem_, guess.x, guess.u);
    last_.warm_started = true;
  } else {
    guess = cold_start(problem_);
  }
  last_.solution = solve_ocp(problem_, &guess, options_);
  previous_ = last_.solution;
  return last_.solution.u[0];
}

}  // namespace dhgmpc
