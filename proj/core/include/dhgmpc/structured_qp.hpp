#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dhgmpc {

/// One stage of
///   min  sum_k 1/2 x'Qx + x'S'u + 1/2 u'Ru + q'x + r'u
///   s.t. x_{k+1} = A x_k + B u_k + c_k,  x_0 given,
///        box bounds on x_k and u_k (infinite entries are ignored),
///        C x_k + D u_k <= g.
/// The last stage has no input and no dynamics.
struct QpStage {
  Eigen::MatrixXd q_xx;
  Eigen::MatrixXd q_ux;  // S, m x n
  Eigen::MatrixXd q_uu;
  Eigen::VectorXd q_x;
  Eigen::VectorXd q_u;

  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd c;

  Eigen::VectorXd x_lb;
  Eigen::VectorXd x_ub;
  Eigen::VectorXd u_lb;
  Eigen::VectorXd u_ub;

  Eigen::MatrixXd cx;  // general rows
  Eigen::MatrixXd cu;
  Eigen::VectorXd g;
};

struct StructuredQp {
  std::vector<QpStage> stages;  // N + 1 entries
  Eigen::VectorXd x0;
  int horizon() const { return static_cast<int>(stages.size()) - 1; }
};

struct QpOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
};

/// Multipliers of the inequality rows of one stage: finite x bounds (lower
/// then upper, by index), finite u bounds, then the general rows.
struct QpSolution {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> pi;   // dynamics multipliers, N entries
  std::vector<Eigen::VectorXd> lam;  // inequality multipliers, N + 1 entries
  std::vector<Eigen::VectorXd> slack;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

/// Mehrotra predictor-corrector interior point method. Each Newton system is
/// solved by a Riccati recursion over the stages, and the factorization is
/// shared by the predictor and corrector solves.
QpSolution solve_structured_qp(const StructuredQp& qp,
                               const QpOptions& options = {});

struct QpKkt {
  double stationarity = 0.0;
  double dynamics = 0.0;
  double infeasibility = 0.0;    // max(0, row - bound)
  double complementarity = 0.0;  // max |lam_i (bound_i - row_i)|
  double dual_sign = 0.0;        // max(0, -lam_i)
  double max() const;
};

/// First-order optimality residuals of `qp` at a primal-dual point. The
/// multipliers follow the row order documented on QpSolution; x[0] is taken
/// as given.
QpKkt evaluate_qp_kkt(const StructuredQp& qp,
                      const std::vector<Eigen::VectorXd>& x,
                      const std::vector<Eigen::VectorXd>& u,
                      const std::vector<Eigen::VectorXd>& pi,
                      const std::vector<Eigen::VectorXd>& lam);

/// Number of inequality rows of stage k as counted by the solver.
int qp_stage_rows(const StructuredQp& qp, int k);

}  // namespace dhgmpc
