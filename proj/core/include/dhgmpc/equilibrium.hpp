#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhgmpc/constraints.hpp"
#include "dhgmpc/plant.hpp"

namespace dhgmpc {

class EquilibriumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A temperature held fixed while solving for the steady state.
struct TemperaturePin {
  enum class Target { kVertex, kEdge };
  Target target = Target::kVertex;
  std::string id;
  double value = 0.0;

  bool operator==(const TemperaturePin&) const = default;
};

struct FillTarget {
  std::string tes;
  double fraction = 0.5;

  bool operator==(const FillTarget&) const = default;
};

struct Demand {
  std::string edge;  // consumer HX id
  double power = 0.0;  // kW

  bool operator==(const Demand&) const = default;
};

struct SteadyStateSpec {
  std::vector<Demand> demands;
  double ambient = 10.0;
  std::vector<TemperaturePin> pins;
  std::vector<FillTarget> fills;  // storages not listed default to 0.5

  bool operator==(const SteadyStateSpec&) const = default;
};

struct SteadyState {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd d;
  double residual = 0.0;  // ||f(x, u, d)||_inf
  int iterations = 0;
};

struct SteadyStateOptions {
  int max_iterations = 200;
  int max_halvings = 30;
  double tolerance = 1e-8;
};

/// Damped Newton on f(x, u, d) = 0 stacked with the pin equalities. The
/// hot-layer masses are fixed by the fill targets; the unknowns are T_v,
/// T_e, q_c and P_pr. Steps are minimum-norm least-squares solutions, so an
/// under-pinned system still converges to one of its steady states.
SteadyState solve_steady_state(const ThermoHydraulicModel& model,
                               const SteadyStateSpec& spec,
                               const SteadyStateOptions& options = {});

/// Demands of `spec` in consumer order.
Eigen::VectorXd demand_vector(const ThermoHydraulicModel& model,
                              const SteadyStateSpec& spec);

struct SteadyStateReport {
  double residual = 0.0;
  double state_margin = 0.0;  // distance of x to the nearest bound
  double input_margin = 0.0;  // distance of u to the nearest bound
  bool residual_ok = false;
  bool state_inside = false;
  bool input_interior = false;
  bool passed() const { return residual_ok && state_inside && input_interior; }
};

SteadyStateReport validate_steady_state(const ThermoHydraulicModel& model,
                                        const SteadyState& ss,
                                        const ConstraintSet& constraints,
                                        double tolerance = 1e-8);

}  // namespace dhgmpc
