#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhgmpc/constraints.hpp"
#include "dhgmpc/equilibrium.hpp"
#include "dhgmpc/plant.hpp"
#include "dhgmpc/structured_qp.hpp"
#include "dhgmpc/terminal.hpp"

namespace dhgmpc {

class ControllerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { kMpc1, kMpc2 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

/// Tuple index (0 = set point I, 1 = set point II) for each stage and for
/// the terminal ingredients.
struct Schedule {
  std::vector<int> stage;
  int terminal = 0;

  bool operator==(const Schedule&) const = default;
};

/// MPC 1 switches every stage at k_step. MPC 2 moves the switch through the
/// horizon: stage i follows II once k + i >= k_step, and the terminal set
/// changes at k = k_step - N.
Schedule reference_schedule(Variant variant, int k, int horizon, int k_step);

struct StageReference {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd d;
};

struct TerminalSet {
  Eigen::MatrixXd p;
  double alpha = 0.0;
  Eigen::VectorXd x_bar;
  Eigen::VectorXd u_bar;
  Eigen::MatrixXd k;  // LQR gain, used to extend warm starts
};

TerminalSet terminal_set(const TerminalIngredients& ti);

struct OcpProblem {
  const DiscreteModel* model = nullptr;
  Eigen::VectorXd x0;
  std::vector<StageReference> stages;  // N entries
  TerminalSet terminal;
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
  ConstraintSet constraints;

  int horizon() const { return static_cast<int>(stages.size()); }
};

/// Multiple-shooting transcription of the finite-horizon problem. `tuples`
/// and `terminals` are indexed by the schedule entries.
OcpProblem build_ocp(const DiscreteModel& model, const Eigen::VectorXd& x0,
                     const Schedule& schedule,
                     const std::vector<StageReference>& tuples,
                     const std::vector<const TerminalIngredients*>& terminals,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     const ConstraintSet& constraints);

enum class SolveStatus { kConverged, kIterationLimit };

struct OcpSolution {
  std::vector<Eigen::VectorXd> x;  // N + 1
  std::vector<Eigen::VectorXd> u;  // N
  std::vector<Eigen::VectorXd> pi;   // scaled dynamics multipliers
  std::vector<Eigen::VectorXd> lam;  // scaled inequality multipliers
  double objective = 0.0;
  double kkt = 0.0;
  double max_defect = 0.0;
  double max_violation = 0.0;  // bounds and terminal set, physical units
  double terminal_cost = 0.0;  // C_P(x_N) / alpha
  int iterations = 0;
  int qp_iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
};

struct SqpOptions {
  int max_iterations = 100;
  double kkt_tolerance = 1e-8;
  QpOptions qp;
  // Variables are divided by these inside the QP; empty means 1.
  Eigen::VectorXd x_scale;
  Eigen::VectorXd u_scale;
};

/// Scales that express masses in tonnes and heat flows in MW.
void default_scaling(const StateLayout& layout, SqpOptions* options);

/// Primal guess for the SQP; multipliers are optional.
struct OcpGuess {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> pi;
  std::vector<Eigen::VectorXd> lam;
};

/// Stage cost l(x, u) with respect to one reference.
double stage_cost(const OcpProblem& ocp, int k, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u);
double ocp_objective(const OcpProblem& ocp,
                     const std::vector<Eigen::VectorXd>& x,
                     const std::vector<Eigen::VectorXd>& u);

/// Largest dynamics defect and constraint violation of a trajectory.
struct TrajectoryCheck {
  double max_defect = 0.0;
  double max_violation = 0.0;
};
TrajectoryCheck check_trajectory(const OcpProblem& ocp,
                                 const std::vector<Eigen::VectorXd>& x,
                                 const std::vector<Eigen::VectorXd>& u);

/// Sequential quadratic programming with Gauss-Newton Hessians, an interior
/// point QP per iteration and an l1 merit line search. The terminal
/// ellipsoid enters each QP as its linearization. Throws ControllerError if
/// a QP fails.
OcpSolution solve_ocp(const OcpProblem& ocp, const OcpGuess* guess,
                      const SqpOptions& options);

/// Cold start: x0 followed by the stage-0 reference, inputs at the stage-0
/// reference input.
OcpGuess cold_start(const OcpProblem& ocp);

/// Shifts a solution by one step and appends the terminal feedback law.
OcpGuess shift_solution(const OcpSolution& previous, const OcpProblem& next);

struct MpcStepInfo {
  Schedule schedule;
  OcpSolution solution;
  TrajectoryCheck warm_start;  // shifted guess before optimization
  bool warm_started = false;
};

/// Receding-horizon controller for one variant. Keeps the last solution
/// for warm starting.
class MpcController {
 public:
  MpcController(const DiscreteModel& model, std::vector<StageReference> tuples,
                std::vector<TerminalIngredients> terminals, Eigen::MatrixXd q,
                Eigen::MatrixXd r, ConstraintSet constraints, int horizon,
                int k_step, Variant variant, SqpOptions options);

  /// Solves the problem for state x at time step k and returns u*(0).
  Eigen::VectorXd step(const Eigen::VectorXd& x, int k);

  const MpcStepInfo& last() const { return last_; }
  void reset() { previous_.reset(); }
  Variant variant() const { return variant_; }
  const OcpProblem& problem() const { return problem_; }

 private:
  const DiscreteModel* model_;
  std::vector<StageReference> tuples_;
  std::vector<TerminalIngredients> terminals_;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd r_;
  ConstraintSet constraints_;
  int horizon_;
  int k_step_;
  Variant variant_;
  SqpOptions options_;
  OcpProblem problem_;
  std::optional<OcpSolution> previous_;
  MpcStepInfo last_;
};

}  // namespace dhgmpc
