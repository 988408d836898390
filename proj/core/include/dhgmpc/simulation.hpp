#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/controller.hpp"

namespace dhgmpc {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One closed-loop step. x is the state at the start of the step and u the
/// input applied over it.
struct StepRecord {
  int k = 0;
  double t = 0.0;  // s
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd d;  // actual disturbance
  int stage_reference = 0;     // tuple of stage 0
  int terminal_reference = 0;  // tuple of the terminal set
  double objective = 0.0;
  double terminal_cost = 0.0;  // C_P(x_N) / alpha
  int sqp_iterations = 0;
  int qp_iterations = 0;
  double kkt = 0.0;
  SolveStatus status = SolveStatus::kConverged;
  double predicted_violation = 0.0;  // over the optimized trajectory
  double predicted_defect = 0.0;
  double state_violation = 0.0;  // of x
  double input_violation = 0.0;  // of u
  double mass_error = 0.0;       // max |m_hot + m_cold - m_tes|
  bool warm_started = false;
  double warm_start_defect = 0.0;
  double warm_start_violation = 0.0;
  /// Per input: -1 at its lower bound, +1 at its upper bound, 0 otherwise.
  Eigen::VectorXi input_bound;
  double solve_seconds = 0.0;  // wall time, excluded from trajectory CSVs
};

struct SimulationOptions {
  Variant variant = Variant::kMpc1;
  std::optional<Eigen::VectorXd> initial_state;  // default: initial_state(cs)
  std::optional<int> k_step;                     // default: scenario value
  std::optional<int> steps;                      // default: scenario n_sim
  /// Relative tolerance for flagging an input as sitting on a bound.
  double bound_tolerance = 1e-6;
  std::function<void(const StepRecord&)> on_step;
};

struct ClosedLoopMetrics {
  int converged_first = -1;   // set point I, first k it stays reached before k_step
  int converged_second = -1;  // set point II, after k_step
  double mean_solve_seconds = 0.0;
  double max_solve_seconds = 0.0;
  double total_solve_seconds = 0.0;
  int max_sqp_iterations = 0;
  int iteration_limit_steps = 0;
  double max_state_violation = 0.0;
  double max_input_violation = 0.0;
  double max_predicted_violation = 0.0;
  double max_mass_error = 0.0;
  /// Max |u(k+1) - u(k)| per input over [k_step - N, k_step + N].
  Eigen::VectorXd max_input_change;
  /// Steps at which some producer input sits on a bound.
  std::vector<int> producer_bound_steps;
};

struct ClosedLoopResult {
  Variant variant = Variant::kMpc1;
  double dt = 0.0;
  int horizon = 0;
  int k_step = 0;
  std::vector<StepRecord> steps;
  Eigen::VectorXd final_state;  // x(N_sim)
  ClosedLoopMetrics metrics;

  /// x(0), ..., x(N_sim).
  std::vector<Eigen::VectorXd> states() const;
};

/// Closed loop with the Euler model as plant. The actual demands switch to
/// set point II at k_step. Throws SimulationError carrying the step index if
/// the controller fails; `partial` (if given) receives the log so far.
ClosedLoopResult run_closed_loop(const CaseStudy& cs,
                                 const std::array<TerminalIngredients, 2>& terminals,
                                 const SimulationOptions& options,
                                 ClosedLoopResult* partial = nullptr);

/// Runs both variants as independent jobs.
std::array<ClosedLoopResult, 2> run_both(
    const CaseStudy& cs, const std::array<TerminalIngredients, 2>& terminals,
    const SimulationOptions& options);

/// First step from which the unit-scaled infinity-norm error to `reference`
/// stays below `threshold` for every state in [begin, end]; -1 if none.
int convergence_step(const std::vector<Eigen::VectorXd>& states,
                     const Eigen::VectorXd& reference,
                     const Eigen::VectorXd& scale, double threshold, int begin,
                     int end);

ClosedLoopMetrics compute_metrics(const CaseStudy& cs,
                                  const ClosedLoopResult& result);

struct Comparison {
  Eigen::VectorXd change_first;   // per producer, MPC 1
  Eigen::VectorXd change_second;  // per producer, MPC 2
  Eigen::VectorXd ratio;          // change_first / change_second
  double overall_ratio = 1.0;     // max change of MPC 1 / max change of MPC 2
  int converged_first = -1;       // k at which MPC 1 reaches set point II
  int converged_second = -1;      // same for MPC 2
  double mean_solve_first = 0.0;
  double mean_solve_second = 0.0;
};

/// Compares an MPC 1 run with an MPC 2 run of the same scenario. Throws
/// SimulationError if the runs do not match.
Comparison compare_runs(const CaseStudy& cs, const ClosedLoopResult& mpc1,
                        const ClosedLoopResult& mpc2);

}  // namespace dhgmpc
