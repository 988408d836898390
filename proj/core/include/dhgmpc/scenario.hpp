#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dhgmpc/equilibrium.hpp"
#include "dhgmpc/plant.hpp"
#include "dhgmpc/topology.hpp"

namespace dhgmpc {

/// Parse failure; `line()` is 1-based, 0 when the problem is not tied to a
/// single line.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct PhysicalSettings {
  double density = 988.05;
  double heat_capacity = 4.18;
  double friction = 0.02;
  KappaUnits kappa_units = KappaUnits::kMassFlow;
  double kappa_vertex = 0.2;
  double kappa_edge = 0.2;
  std::map<std::string, double> tes_mass;  // storage id -> kg
  double junction_mass = 5000.0;
  double edge_length = 500.0;
  double pressure_gradient = 300.0;  // Pa/m
  double hx_volume = 0.0;  // m^3; 0 sizes heat exchangers like pipes
  double velocity_cap = 3.0;  // m/s

  bool operator==(const PhysicalSettings&) const = default;
};

struct MpcSettings {
  double dt = 60.0;
  int horizon = 60;
  int n_sim = 180;
  int k_step = 90;
  // Weights are 1/scale^2 per physical group.
  double mass_scale = 1000.0;
  double temperature_scale = 3.0;
  double flow_scale = 1.0;
  double power_scale = 5000.0;
  double qstar_factor = 1.05;
  int alpha_starts = 100;
  double temperature_min = 5.0;
  double temperature_max = 110.0;
  double producer_bound_factor = 1.3;
  double init_temperature_offset = -2.0;
  double init_mass_factor = 0.95;
  double convergence_threshold = 0.1;
  int sqp_max_iterations = 100;
  double kkt_tolerance = 1e-8;

  bool operator==(const MpcSettings&) const = default;
};

struct Scenario {
  DhgGraph graph;
  PhysicalSettings physics;
  std::array<SteadyStateSpec, 2> setpoints;  // I, II
  MpcSettings mpc;
  std::uint64_t seed = 1;

  bool operator==(const Scenario&) const = default;
};

/// Line-oriented INI dialect:
///   [graph]        vertex <id> <class> [<storage>] / edge <id> <class> <src> <dst>
///   [params]       key = value, tes_mass.<storage> = kg
///   [setpoint.I]   ambient, demand.<edge>, pin.vertex.<id>, pin.edge.<id>,
///   [setpoint.II]  fill.<storage>
///   [mpc]          key = value
///   [seed]         seed = integer
/// '#' starts a comment. Unknown sections and keys are errors.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Writes every field; doubles use %.17g so parsing the output gives back an
/// identical Scenario.
std::string serialize_scenario(const Scenario& scenario);

/// Cross-field checks: k_step > N, N_sim > k_step, dt > 0, masses present.
void validate_scenario(const Scenario& scenario);

}  // namespace dhgmpc
