#pragma once

#include <Eigen/Dense>

#include "dhgmpc/plant.hpp"

namespace dhgmpc {

/// State box, input box and two-sided linear input rows
///   x_lb <= x <= x_ub,  u_lb <= u <= u_ub,  lin_lb <= C u <= lin_ub.
struct ConstraintSet {
  Eigen::VectorXd x_lb;
  Eigen::VectorXd x_ub;
  Eigen::VectorXd u_lb;
  Eigen::VectorXd u_ub;
  Eigen::MatrixXd u_lin;
  Eigen::VectorXd lin_lb;
  Eigen::VectorXd lin_ub;

  int num_linear() const { return static_cast<int>(u_lin.rows()); }

  /// Largest amount by which any bound is exceeded (0 when feasible).
  double state_violation(const Eigen::VectorXd& x) const;
  double input_violation(const Eigen::VectorXd& u) const;

  /// Signed distance to the nearest bound; negative when violated.
  double state_margin(const Eigen::VectorXd& x) const;
  double input_margin(const Eigen::VectorXd& u) const;
};

struct BoundSpec {
  double temperature_min = 5.0;
  double temperature_max = 110.0;
  Eigen::VectorXd edge_flow_max;  // kg/s, one per edge
  Eigen::VectorXd producer_max;   // kW, one per producer
};

/// Temperatures in [t_min, t_max], 0 <= m_h <= m_tes, 0 <= P_pr <= P_ub and
/// 0 <= F^T q_c <= q_ub. Chord flows are bounded by the box; the linear rows
/// cover the remaining tree edges so no row is duplicated.
ConstraintSet make_constraints(const ThermoHydraulicModel& model,
                               const BoundSpec& spec);

/// Mass flow at which the mean velocity in a pipe of diameter d equals `cap`.
Eigen::VectorXd velocity_flow_caps(const Eigen::VectorXd& diameters,
                                   double density, double cap);

}  // namespace dhgmpc
