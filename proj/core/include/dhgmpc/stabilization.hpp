#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "dhgmpc/equilibrium.hpp"
#include "dhgmpc/plant.hpp"

namespace dhgmpc {

class StabilizabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discrete-time linearization at a steady state.
struct LinearizedModel {
  Eigen::MatrixXd a;          // I + dt M^-1 (A_0 + sum u_i A_i)
  Eigen::MatrixXd b;          // dt M^-1 (E_u + [0; A^(x)])
  Eigen::VectorXd mass;       // diagonal of M at the steady state
  Eigen::MatrixXd flow_sens;  // A^(x) = [A~(e_1) T ... A~(e_F) T]
  double dt = 0.0;
  /// Largest entry of |A_exact - a| where A_exact differentiates M(x) too.
  /// Vanishes up to the steady-state residual.
  double mass_dependence_gap = 0.0;
};

/// Jacobians with M frozen at M(x_bar).
LinearizedModel linearize(const ThermoHydraulicModel& model,
                          const SteadyState& ss, double dt);

struct StabilizingFeedback {
  Eigen::MatrixXd g;  // m x n, rows for P_pr are zero
  double epsilon = 0.0;
  double spectral_radius = 0.0;
  double lyapunov_max_eig = 0.0;  // lambda_max(A_d^T M A_d - M)
  bool stable() const {
    return spectral_radius < 1.0 && lyapunov_max_eig < -1e-12;
  }
};

/// G = [-eps W, eps W (A^ W)^T; 0, 0] with W the right inverse of
/// (B)_{V_h} F^T.
StabilizingFeedback construct_feedback(const LinearizedModel& lin,
                                       const Eigen::MatrixXd& right_inverse,
                                       int num_hot, double epsilon);

/// Largest eps in {1, 1/2, ..., 2^-40} whose feedback is a contraction in
/// the M-weighted norm. Throws StabilizabilityError when none is.
StabilizingFeedback auto_select_epsilon(const LinearizedModel& lin,
                                        const Eigen::MatrixXd& right_inverse,
                                        int num_hot);

double spectral_radius(const Eigen::MatrixXd& a);

}  // namespace dhgmpc
