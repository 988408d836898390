#include "dhgmpc/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace dhgmpc {

namespace {

struct ResolvedPin {
  int state_index;
  double value;
};

std::vector<ResolvedPin> resolve_pins(const ThermoHydraulicModel& model,
                                      const SteadyStateSpec& spec) {
  const DhgGraph& g = model.network().graph;
  const StateLayout& lay = model.layout();
  std::vector<ResolvedPin> out;
  std::set<int> seen;
  for (const auto& pin : spec.pins) {
    int idx = 0;
    try {
      idx = pin.target == TemperaturePin::Target::kVertex
                ? lay.vertex_temperature(g.vertex_index(pin.id))
                : lay.edge_temperature(g.edge_index(pin.id));
    } catch (const TopologyError&) {
      throw EquilibriumError("temperature pin refers to unknown id '" + pin.id +
                             "'");
    }
    if (!seen.insert(idx).second) {
      throw EquilibriumError("temperature of '" + pin.id + "' pinned twice");
    }
    out.push_back({idx, pin.value});
  }
  return out;
}

Eigen::VectorXd fill_masses(const ThermoHydraulicModel& model,
                            const SteadyStateSpec& spec) {
  const DhgGraph& g = model.network().graph;
  Eigen::VectorXd fraction = Eigen::VectorXd::Constant(g.num_tes(), 0.5);
  for (const auto& fill : spec.fills) {
    const auto& ids = g.tes_ids();
    auto it = std::find(ids.begin(), ids.end(), fill.tes);
    if (it == ids.end()) {
      throw EquilibriumError("fill target for unknown storage '" + fill.tes +
                             "'");
    }
    if (!(fill.fraction > 0.0 && fill.fraction < 1.0)) {
      throw EquilibriumError("fill fraction of '" + fill.tes +
                             "' must lie strictly between 0 and 1");
    }
    fraction(it - ids.begin()) = fill.fraction;
  }
  return fraction.cwiseProduct(model.params().tes_mass);
}

}  // namespace

Eigen::VectorXd demand_vector(const ThermoHydraulicModel& model,
                              const SteadyStateSpec& spec) {
  const Network& net = model.network();
  Eigen::VectorXd p = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(net.consumers.size()), std::nan(""));
  for (const auto& dem : spec.demands) {
    int e = -1;
    try {
      e = net.graph.edge_index(dem.edge);
    } catch (const TopologyError&) {
      throw EquilibriumError("demand for unknown edge '" + dem.edge + "'");
    }
    auto it = std::find(net.consumers.begin(), net.consumers.end(), e);
    if (it == net.consumers.end()) {
      throw EquilibriumError("demand edge '" + dem.edge +
                             "' is not a consumer heat exchanger");
    }
    if (!(dem.power >= 0.0)) {
      throw EquilibriumError("demand of '" + dem.edge + "' is negative");
    }
    p(it - net.consumers.begin()) = dem.power;
  }
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (std::isnan(p(k))) {
      throw EquilibriumError("no demand given for consumer '" +
                             net.graph.edges()[net.consumers[k]].id + "'");
    }
  }
  return p;
}

SteadyState solve_steady_state(const ThermoHydraulicModel& model,
                               const SteadyStateSpec& spec,
                               const SteadyStateOptions& options) {
  const StateLayout& lay = model.layout();
  const int nh = lay.num_hot;
  const int nt = lay.temperatures();
  const int m = lay.m();
  const int n = lay.n();

  const std::vector<ResolvedPin> pins = resolve_pins(model, spec);
  const Eigen::VectorXd demands = demand_vector(model, spec);
  const Eigen::VectorXd d = model.make_disturbance(demands, spec.ambient);

  Eigen::VectorXd x(n);
  Eigen::VectorXd u(m);
  x.head(nh) = fill_masses(model, spec);
  double t0 = spec.ambient;
  if (!pins.empty()) {
    t0 = 0.0;
    for (const auto& p : pins) t0 += p.value;
    t0 /= static_cast<double>(pins.size());
  }
  x.tail(nt).setConstant(t0);
  const double total_demand = demands.sum();
  u.head(lay.num_chords).setConstant(total_demand > 0.0 ? 1.0 : 0.0);
  u.tail(lay.num_producers)
      .setConstant(lay.num_producers > 0
                       ? total_demand / lay.num_producers
                       : 0.0);

  const int rows = n + static_cast<int>(pins.size());
  const int cols = nt + m;
  auto residual = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& us) {
    Eigen::VectorXd r(rows);
    r.head(n) = model.dynamics(xs, us, d);
    for (std::size_t i = 0; i < pins.size(); ++i) {
      r(n + static_cast<int>(i)) = xs(pins[i].state_index) - pins[i].value;
    }
    return r;
  };

  Eigen::VectorXd r = residual(x, u);
  double norm = r.lpNorm<Eigen::Infinity>();
  int iter = 0;
  Eigen::MatrixXd dfdx;
  Eigen::MatrixXd dfdu;
  Eigen::MatrixXd jac(rows, cols);
  for (; iter < options.max_iterations; ++iter) {
    if (norm <= 1e-3 * options.tolerance) break;
    model.jacobians(x, u, d, &dfdx, &dfdu);
    jac.setZero();
    jac.topLeftCorner(n, nt) = dfdx.rightCols(nt);
    jac.topRightCorner(n, m) = dfdu;
    for (std::size_t i = 0; i < pins.size(); ++i) {
      jac(n + static_cast<int>(i), pins[i].state_index - nh) = 1.0;
    }
    const Eigen::VectorXd step =
        jac.completeOrthogonalDecomposition().solve(-r);

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      Eigen::VectorXd xt = x;
      Eigen::VectorXd ut = u + t * step.tail(m);
      xt.tail(nt) += t * step.head(nt);
      Eigen::VectorXd rt;
      try {
        rt = residual(xt, ut);
      } catch (const SingularMassError&) {
        continue;
      }
      const double nt_norm = rt.lpNorm<Eigen::Infinity>();
      if (nt_norm < norm) {
        x = std::move(xt);
        u = std::move(ut);
        r = std::move(rt);
        norm = nt_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stagnated at rounding level or diverging
  }

  // Pins hold exactly; any rounding left by the linear solve is removed.
  for (const auto& p : pins) x(p.state_index) = p.value;
  SteadyState ss;
  ss.x = x;
  ss.u = u;
  ss.d = d;
  ss.iterations = iter;
  ss.residual = model.dynamics(x, u, d).lpNorm<Eigen::Infinity>();
  if (!(ss.residual <= options.tolerance)) {
    throw EquilibriumError("steady-state Newton iteration did not converge (" +
                           std::to_string(iter) + " iterations, residual " +
                           std::to_string(ss.residual) + ")");
  }
  const Eigen::VectorXd qe = model.edge_flows(u);
  for (Eigen::Index e = 0; e < qe.size(); ++e) {
    if (qe(e) < -options.tolerance) {
      throw EquilibriumError("steady state has negative flow " +
                             std::to_string(qe(e)) + " kg/s on edge '" +
                             model.network().graph.edges()[e].id + "'");
    }
  }
  return ss;
}

SteadyStateReport validate_steady_state(const ThermoHydraulicModel& model,
                                        const SteadyState& ss,
                                        const ConstraintSet& constraints,
                                        double tolerance) {
  SteadyStateReport rep;
  try {
    rep.residual = model.dynamics(ss.x, ss.u, ss.d).lpNorm<Eigen::Infinity>();
  } catch (const SingularMassError&) {
    rep.residual = std::numeric_limits<double>::infinity();
  }
  rep.residual_ok = rep.residual <= tolerance;
  rep.state_margin = constraints.state_margin(ss.x);
  rep.input_margin = constraints.input_margin(ss.u);
  rep.state_inside = rep.state_margin > 0.0;
  rep.input_interior = rep.input_margin > 0.0;
  return rep;
}

}  // namespace dhgmpc
