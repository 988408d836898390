#include "dhgmpc/constraints.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dhgmpc {

namespace {

double box_violation(const Eigen::VectorXd& v, const Eigen::VectorXd& lb,
                     const Eigen::VectorXd& ub) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    worst = std::max({worst, lb(i) - v(i), v(i) - ub(i)});
  }
  return worst;
}

double box_margin(const Eigen::VectorXd& v, const Eigen::VectorXd& lb,
                  const Eigen::VectorXd& ub) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    margin = std::min({margin, v(i) - lb(i), ub(i) - v(i)});
  }
  return margin;
}

}  // namespace

double ConstraintSet::state_violation(const Eigen::VectorXd& x) const {
  return box_violation(x, x_lb, x_ub);
}

double ConstraintSet::input_violation(const Eigen::VectorXd& u) const {
  double worst = box_violation(u, u_lb, u_ub);
  if (num_linear() > 0) {
    worst = std::max(worst, box_violation(u_lin * u, lin_lb, lin_ub));
  }
  return worst;
}

double ConstraintSet::state_margin(const Eigen::VectorXd& x) const {
  return box_margin(x, x_lb, x_ub);
}

double ConstraintSet::input_margin(const Eigen::VectorXd& u) const {
  double margin = box_margin(u, u_lb, u_ub);
  if (num_linear() > 0) {
    margin = std::min(margin, box_margin(u_lin * u, lin_lb, lin_ub));
  }
  return margin;
}

Eigen::VectorXd velocity_flow_caps(const Eigen::VectorXd& diameters,
                                   double density, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("velocity cap must be positive");
  return (density * cap * std::numbers::pi / 4.0) *
         diameters.array().square().matrix();
}

ConstraintSet make_constraints(const ThermoHydraulicModel& model,
                               const BoundSpec& spec) {
  const StateLayout& lay = model.layout();
  const Network& net = model.network();
  if (spec.edge_flow_max.size() != lay.num_edges ||
      spec.producer_max.size() != lay.num_producers) {
    throw std::invalid_argument("make_constraints: bound vectors do not match "
                                "the network");
  }
  if (!(spec.temperature_min < spec.temperature_max)) {
    throw std::invalid_argument("make_constraints: empty temperature range");
  }

  ConstraintSet c;
  c.x_lb.setConstant(lay.n(), spec.temperature_min);
  c.x_ub.setConstant(lay.n(), spec.temperature_max);
  for (int t = 0; t < lay.num_hot; ++t) {
    c.x_lb(lay.hot_mass(t)) = 0.0;
    c.x_ub(lay.hot_mass(t)) = model.params().tes_mass(t);
  }

  c.u_lb.setZero(lay.m());
  c.u_ub.resize(lay.m());
  for (int i = 0; i < lay.num_chords; ++i) {
    c.u_ub(lay.chord_flow(i)) = spec.edge_flow_max(net.basis.chords[i]);
  }
  for (int k = 0; k < lay.num_producers; ++k) {
    c.u_ub(lay.producer_power(k)) = spec.producer_max(k);
  }

  const auto& tree = net.basis.tree_edges;
  c.u_lin = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tree.size()),
                                  lay.m());
  c.lin_lb.setZero(static_cast<Eigen::Index>(tree.size()));
  c.lin_ub.resize(static_cast<Eigen::Index>(tree.size()));
  for (std::size_t r = 0; r < tree.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    c.u_lin.row(row).head(lay.num_chords) = model.cycle_map().row(tree[r]);
    c.lin_ub(row) = spec.edge_flow_max(tree[r]);
  }
  return c;
}

}  // namespace dhgmpc
