#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "dhgmpc/constraints.hpp"
#include "dhgmpc/equilibrium.hpp"
#include "dhgmpc/plant.hpp"

namespace dhgmpc {

class TerminalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DareSolution {
  Eigen::MatrixXd p;
  Eigen::MatrixXd k;  // u = u_bar - K (x - x_bar)
  double residual = 0.0;  // ||Riccati residual||_F / max(1, ||P||_F)
  int iterations = 0;
};

/// Discrete algebraic Riccati equation by the structure-preserving doubling
/// algorithm.
DareSolution solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                        int max_iterations = 100);

/// A^T P A - P = -Q by Smith doubling. Throws when rho(A) >= 1.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& q);

/// ||A^T P A - P + Q||_F / max(1, ||P||_F).
double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p,
                         const Eigen::MatrixXd& q);

/// Half-widths sqrt(alpha (P^-1)_ii) of the smallest box around
/// {x : x^T P x <= alpha}.
Eigen::VectorXd ellipsoid_box_projection(const Eigen::MatrixXd& p,
                                         double alpha);

struct Weights {
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
};

struct TerminalOptions {
  double qstar_factor = 1.05;
  int starts = 100;
  int ascent_iterations = 40;
  double alpha_rel_tol = 1e-3;
  std::uint64_t seed = 1;
};

struct TerminalIngredients {
  Eigen::MatrixXd p;
  double alpha = 0.0;
  Eigen::MatrixXd k;
  Eigen::MatrixXd p_lqr;
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
  Eigen::VectorXd x_bar;
  Eigen::VectorXd u_bar;
  Eigen::VectorXd d_bar;
  double alpha_max = 0.0;
  double dare_residual = 0.0;
  double lyapunov_residual = 0.0;
  double closed_loop_radius = 0.0;
  double max_violation = 0.0;  // max of phi found at the accepted alpha

  double cost(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd e = x - x_bar;
    return e.dot(p * e);
  }
  Eigen::VectorXd feedback(const Eigen::VectorXd& x) const {
    return u_bar - k * (x - x_bar);
  }
};

/// Violation phi(x) = C_P(x+) - C_P(x) + l(x, u) under u = u_bar - K(x - x_bar).
double terminal_violation(const DiscreteModel& model,
                          const TerminalIngredients& ti,
                          const Eigen::VectorXd& x);

/// Largest alpha for which the ellipsoid's box lies in X and the feedback
/// respects every input row exactly.
double admissible_alpha(const Eigen::MatrixXd& p, const Eigen::MatrixXd& k,
                        const Eigen::VectorXd& x_bar,
                        const Eigen::VectorXd& u_bar,
                        const ConstraintSet& constraints);

/// Bisection on alpha in (0, alpha_max]; each trial maximizes phi over the
/// ellipsoid boundary by projected gradient ascent from `starts` normally
/// distributed points. The maximizer is a heuristic, not a certificate.
double find_alpha(const DiscreteModel& model, TerminalIngredients& ti,
                  const ConstraintSet& constraints,
                  const TerminalOptions& options);

/// LQR gain, Lyapunov terminal cost with inflated weight, then alpha.
TerminalIngredients synthesize_terminal(const DiscreteModel& model,
                                        const SteadyState& ss,
                                        const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b,
                                        const ConstraintSet& constraints,
                                        const Weights& weights,
                                        const TerminalOptions& options = {});

struct DecreaseCheck {
  int samples = 0;
  double worst_decrease = 0.0;  // max of C_P(x+) - C_P(x) + l(x, u)
  double worst_input_violation = 0.0;
  double worst_state_violation = 0.0;
  double worst_successor_cost = 0.0;  // max C_P(x+) / alpha
  bool passed(double slack = 1e-9) const {
    return worst_decrease <= slack && worst_input_violation <= slack &&
           worst_state_violation <= slack && worst_successor_cost <= 1.0;
  }
};

/// Samples the ellipsoid boundary uniformly and steps each point once
/// through the nonlinear model.
DecreaseCheck verify_terminal_decrease(const DiscreteModel& model,
                                       const TerminalIngredients& ti,
                                       const ConstraintSet& constraints,
                                       int samples, std::uint64_t seed);

}  // namespace dhgmpc
