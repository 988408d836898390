#include "dhgmpc/case_study.hpp"

#include <stdexcept>

namespace dhgmpc {

PlantParameters make_plant_parameters(const Scenario& sc,
                                      const Network& net,
                                      const Eigen::VectorXd& diameters) {
  const DhgGraph& g = net.graph;
  const PhysicalSettings& ph = sc.physics;
  PlantParameters p;
  p.density = ph.density;
  p.heat_capacity = ph.heat_capacity;
  p.friction = ph.friction;
  p.ambient = sc.setpoints[0].ambient;
  p.kappa_units = ph.kappa_units;
  p.kappa_vertex = Eigen::VectorXd::Constant(g.num_vertices(), ph.kappa_vertex);
  p.kappa_edge = Eigen::VectorXd::Constant(g.num_edges(), ph.kappa_edge);
  p.tes_mass.resize(g.num_tes());
  for (int t = 0; t < g.num_tes(); ++t) {
    auto it = ph.tes_mass.find(g.tes_ids()[t]);
    if (it == ph.tes_mass.end()) {
      throw std::invalid_argument("missing tes_mass for '" + g.tes_ids()[t] +
                                  "'");
    }
    p.tes_mass(t) = it->second;
  }
  p.junction_mass = Eigen::VectorXd::Constant(g.num_vertices(), ph.junction_mass);
  p.edge_length = Eigen::VectorXd::Constant(g.num_edges(), ph.edge_length);
  p.edge_diameter = diameters;
  p.edge_mass = edge_masses(p.edge_length, diameters, ph.density);
  if (ph.hx_volume > 0.0) {
    for (int e = 0; e < g.num_edges(); ++e) {
      if (g.edges()[e].cls != EdgeClass::kPipe) {
        p.edge_mass(e) = ph.density * ph.hx_volume;
      }
    }
  }
  return p;
}

Weights make_weights(const ThermoHydraulicModel& model, const MpcSettings& m) {
  const StateLayout& lay = model.layout();
  Eigen::VectorXd q(lay.n());
  q.head(lay.num_hot).setConstant(1.0 / (m.mass_scale * m.mass_scale));
  q.tail(lay.temperatures())
      .setConstant(1.0 / (m.temperature_scale * m.temperature_scale));
  Eigen::VectorXd r(lay.m());
  r.head(lay.num_chords).setConstant(1.0 / (m.flow_scale * m.flow_scale));
  r.tail(lay.num_producers).setConstant(1.0 / (m.power_scale * m.power_scale));
  return {q.asDiagonal(), r.asDiagonal()};
}

Eigen::VectorXd unit_scale(const ThermoHydraulicModel& model) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(model.n());
  s.head(model.layout().num_hot).setConstant(1e-3);
  return s;
}

CaseStudy build_case_study(const Scenario& scenario) {
  validate_scenario(scenario);
  CaseStudy cs;
  cs.scenario = scenario;
  Network net = analyze_network(scenario.graph);
  std::vector<int> hot_rows = net.hot;
  cs.structure =
      check_stabilizability_structure(net.incidence, net.basis.cycles, hot_rows);

  // Steady states do not depend on the edge masses, so a placeholder
  // geometry is enough to get the flows that size the pipes.
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(net.graph.num_edges());
  const ThermoHydraulicModel sizing(net, make_plant_parameters(scenario, net, unit));
  const SteadyState design = solve_steady_state(sizing, scenario.setpoints[0]);
  const Eigen::VectorXd flows = sizing.edge_flows(design.u);
  const PhysicalSettings& ph = scenario.physics;
  cs.diameters =
      size_pipes(flows, ph.pressure_gradient, ph.friction, ph.density);

  cs.model = std::make_unique<ThermoHydraulicModel>(
      std::move(net), make_plant_parameters(scenario, sizing.network(),
                                            cs.diameters));
  cs.euler = std::make_unique<EulerModel>(*cs.model, scenario.mpc.dt);
  for (int s = 0; s < 2; ++s) {
    cs.steady[s] = solve_steady_state(*cs.model, scenario.setpoints[s]);
  }

  BoundSpec bounds;
  bounds.temperature_min = scenario.mpc.temperature_min;
  bounds.temperature_max = scenario.mpc.temperature_max;
  cs.flow_caps = velocity_flow_caps(cs.diameters, ph.density, ph.velocity_cap);
  bounds.edge_flow_max = cs.flow_caps;
  const int np = cs.model->layout().num_producers;
  bounds.producer_max.resize(np);
  for (int k = 0; k < np; ++k) {
    const int idx = cs.model->layout().producer_power(k);
    bounds.producer_max(k) = scenario.mpc.producer_bound_factor *
                             std::max(cs.steady[0].u(idx), cs.steady[1].u(idx));
  }
  cs.constraints = make_constraints(*cs.model, bounds);
  cs.weights = make_weights(*cs.model, scenario.mpc);
  return cs;
}

Eigen::VectorXd initial_state(const CaseStudy& cs) {
  const StateLayout& lay = cs.model->layout();
  Eigen::VectorXd x = cs.steady[0].x;
  x.head(lay.num_hot) *= cs.scenario.mpc.init_mass_factor;
  x.tail(lay.temperatures()).array() += cs.scenario.mpc.init_temperature_offset;
  return x;
}

StabilizationReport check_stabilization(const CaseStudy& cs, int setpoint,
                                        double dt) {
  if (!cs.structure.satisfied) {
    throw StabilizabilityError("structural condition on (B)_Vh F^T fails");
  }
  StabilizationReport rep;
  rep.lin = linearize(*cs.model, cs.steady.at(setpoint), dt);
  rep.feedback = auto_select_epsilon(rep.lin, cs.structure.right_inverse,
                                     cs.model->layout().num_hot);
  return rep;
}

TerminalIngredients synthesize_case_terminal(const CaseStudy& cs,
                                             int setpoint) {
  const LinearizedModel lin =
      linearize(*cs.model, cs.steady.at(setpoint), cs.scenario.mpc.dt);
  TerminalOptions opt;
  opt.qstar_factor = cs.scenario.mpc.qstar_factor;
  opt.starts = cs.scenario.mpc.alpha_starts;
  opt.seed = cs.scenario.seed;
  return synthesize_terminal(*cs.euler, cs.steady.at(setpoint), lin.a, lin.b,
                             cs.constraints, cs.weights, opt);
}

Eigen::VectorXd table_projection(const CaseStudy& cs,
                                 const TerminalIngredients& ti) {
  const StateLayout& lay = cs.model->layout();
  const Eigen::VectorXd half = ellipsoid_box_projection(ti.p, ti.alpha);
  Eigen::VectorXd out(2 * lay.num_hot);
  for (int t = 0; t < lay.num_hot; ++t) {
    out(2 * t) = 1e-3 * half(lay.hot_mass(t));
    out(2 * t + 1) =
        half(lay.vertex_temperature(cs.model->network().hot[t]));
  }
  return out;
}

}  // namespace dhgmpc
