#pragma once

#include <array>
#include <memory>

#include <Eigen/Dense>

#include "dhgmpc/constraints.hpp"
#include "dhgmpc/equilibrium.hpp"
#include "dhgmpc/plant.hpp"
#include "dhgmpc/scenario.hpp"
#include "dhgmpc/stabilization.hpp"
#include "dhgmpc/terminal.hpp"
#include "dhgmpc/topology.hpp"

namespace dhgmpc {

/// Everything derived from a scenario before the closed loop starts. The
/// Euler model refers to `model`, so both live on the heap and the struct can
/// be moved freely.
struct CaseStudy {
  Scenario scenario;
  StructureCheck structure;
  std::unique_ptr<ThermoHydraulicModel> model;
  std::unique_ptr<EulerModel> euler;
  Eigen::VectorXd diameters;   // m, per edge
  Eigen::VectorXd flow_caps;   // kg/s, per edge
  std::array<SteadyState, 2> steady;
  ConstraintSet constraints;
  Weights weights;

  const ThermoHydraulicModel& plant() const { return *model; }
  const EulerModel& discrete() const { return *euler; }
};

/// Structure check, pipe sizing at set point I, both steady states, bounds
/// and weights. Throws TopologyError, EquilibriumError or PlantError.
CaseStudy build_case_study(const Scenario& scenario);

/// Plant parameters for given edge diameters.
PlantParameters make_plant_parameters(const Scenario& scenario,
                                      const Network& network,
                                      const Eigen::VectorXd& diameters);

/// Diagonal weights, 1/scale^2 per group: masses, temperatures, flows, power.
Weights make_weights(const ThermoHydraulicModel& model,
                     const MpcSettings& mpc);

/// Per-state factor that turns deviations into tonnes and degrees.
Eigen::VectorXd unit_scale(const ThermoHydraulicModel& model);

/// Steady state I with the configured temperature offset and hot-layer mass
/// factor applied.
Eigen::VectorXd initial_state(const CaseStudy& cs);

struct StabilizationReport {
  LinearizedModel lin;
  StabilizingFeedback feedback;
};

/// Linearization at a set point plus the epsilon search. Throws
/// StabilizabilityError when the search fails.
StabilizationReport check_stabilization(const CaseStudy& cs, int setpoint,
                                        double dt);

TerminalIngredients synthesize_case_terminal(const CaseStudy& cs,
                                             int setpoint);

/// Half-widths for (m_h, T_v) of each storage's hot vertex, in tonnes and
/// degrees, ordered storage by storage.
Eigen::VectorXd table_projection(const CaseStudy& cs,
                                 const TerminalIngredients& ti);

}  // namespace dhgmpc
