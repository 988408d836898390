#include "dhgmpc/plant.hpp"

#include <cmath>
#include <numbers>

namespace dhgmpc {

namespace {

constexpr double kMinVertexMass = 1.0;  // kg
constexpr double kMinDiameter = 1e-3;
constexpr double kMaxDiameter = 2.0;

}  // namespace

double darcy_weisbach_gradient(double flow, double diameter, double friction,
                               double density) {
  const double area = std::numbers::pi * diameter * diameter / 4.0;
  const double velocity = flow / (density * area);
  return friction / diameter * density * velocity * velocity / 2.0;
}

double size_pipe(double flow, double gradient, double friction,
                 double density) {
  if (!(flow > 0.0)) {
    throw PlantError("size_pipe: cannot size a pipe for non-positive flow");
  }
  if (!(gradient > 0.0) || !(friction > 0.0) || !(density > 0.0)) {
    throw PlantError("size_pipe: gradient, friction and density must be > 0");
  }
  double lo = kMinDiameter;
  double hi = kMaxDiameter;
  // The gradient decreases monotonically in d.
  if (darcy_weisbach_gradient(flow, lo, friction, density) < gradient ||
      darcy_weisbach_gradient(flow, hi, friction, density) > gradient) {
    throw PlantError("size_pipe: no diameter in [1 mm, 2 m] matches the target "
                     "pressure gradient");
  }
  while (hi - lo > 1e-10 * lo) {
    const double mid = 0.5 * (lo + hi);
    if (darcy_weisbach_gradient(flow, mid, friction, density) > gradient) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd size_pipes(const Eigen::VectorXd& flows, double gradient,
                           double friction, double density) {
  Eigen::VectorXd d(flows.size());
  for (Eigen::Index j = 0; j < flows.size(); ++j) {
    d(j) = size_pipe(flows(j), gradient, friction, density);
  }
  return d;
}

Eigen::VectorXd edge_masses(const Eigen::VectorXd& lengths,
                            const Eigen::VectorXd& diameters, double density) {
  if (lengths.size() != diameters.size()) {
    throw PlantError("edge_masses: length and diameter vectors differ in size");
  }
  Eigen::VectorXd m(lengths.size());
  for (Eigen::Index j = 0; j < lengths.size(); ++j) {
    if (!(lengths(j) > 0.0)) throw PlantError("edge_masses: non-positive length");
    if (!(diameters(j) > 0.0)) {
      throw PlantError("edge_masses: non-positive diameter");
    }
    m(j) = density * std::numbers::pi * diameters(j) * diameters(j) / 4.0 *
           lengths(j);
  }
  return m;
}

ThermoHydraulicModel::ThermoHydraulicModel(Network network,
                                           PlantParameters params)
    : network_(std::move(network)), params_(std::move(params)) {
  const DhgGraph& g = network_.graph;
  layout_.num_hot = static_cast<int>(network_.hot.size());
  layout_.num_vertices = g.num_vertices();
  layout_.num_edges = g.num_edges();
  layout_.num_chords = network_.num_chords();
  layout_.num_producers = static_cast<int>(network_.producers.size());
  layout_.num_consumers = static_cast<int>(network_.consumers.size());

  const int nv = g.num_vertices();
  const int ne = g.num_edges();
  if (params_.kappa_vertex.size() != nv || params_.kappa_edge.size() != ne ||
      params_.tes_mass.size() != g.num_tes() ||
      params_.junction_mass.size() != nv || params_.edge_mass.size() != ne) {
    throw PlantError("plant parameters do not match the graph dimensions");
  }
  if (!(params_.density > 0.0) || !(params_.heat_capacity > 0.0)) {
    throw PlantError("density and heat capacity must be positive");
  }
  if ((params_.kappa_vertex.array() < 0.0).any() ||
      (params_.kappa_edge.array() < 0.0).any()) {
    throw PlantError("loss coefficients must be non-negative");
  }
  if ((params_.edge_mass.array() <= 0.0).any() ||
      (params_.tes_mass.array() <= 0.0).any()) {
    throw PlantError("edge and storage masses must be positive");
  }
  for (int v : network_.junctions) {
    if (!(params_.junction_mass(v) > 0.0)) {
      throw PlantError("junction masses must be positive");
    }
  }

  cycle_map_ = network_.basis.cycles.cast<double>().transpose();
  Eigen::MatrixXd bh(layout_.num_hot, ne);
  for (int i = 0; i < layout_.num_hot; ++i) {
    bh.row(i) = network_.incidence.row(network_.hot[i]).cast<double>();
  }
  hot_cycle_map_ = bh * cycle_map_;

  const double scale = params_.kappa_units == KappaUnits::kPower
                           ? 1.0 / params_.heat_capacity
                           : 1.0;
  loss_.resize(nv + ne);
  loss_.head(nv) = params_.kappa_vertex * scale;
  loss_.tail(ne) = params_.kappa_edge * scale;

  tes_of_vertex_.assign(nv, -1);
  for (int t = 0; t < g.num_tes(); ++t) {
    tes_of_vertex_[network_.hot[t]] = t;
    tes_of_vertex_[network_.cold[t]] = t;
  }
  in_edges_.assign(nv, {});
  for (int e = 0; e < ne; ++e) in_edges_[g.target(e)].push_back(e);
}

Eigen::VectorXd ThermoHydraulicModel::edge_flows(const Eigen::VectorXd& u) const {
  return cycle_map_ * u.head(layout_.num_chords);
}

Eigen::VectorXd ThermoHydraulicModel::vertex_masses(
    const Eigen::VectorXd& x) const {
  const int nv = layout_.num_vertices;
  Eigen::VectorXd m(nv);
  for (int v = 0; v < nv; ++v) m(v) = params_.junction_mass(v);
  for (int t = 0; t < layout_.num_hot; ++t) {
    m(network_.hot[t]) = x(layout_.hot_mass(t));
    m(network_.cold[t]) = params_.tes_mass(t) - x(layout_.hot_mass(t));
  }
  return m;
}

Eigen::VectorXd ThermoHydraulicModel::mass_diagonal(
    const Eigen::VectorXd& x) const {
  Eigen::VectorXd m(layout_.n());
  m.head(layout_.num_hot).setOnes();
  Eigen::VectorXd mv = vertex_masses(x);
  for (int v = 0; v < layout_.num_vertices; ++v) {
    if (!(mv(v) >= kMinVertexMass)) {
      throw SingularMassError("mass of vertex '" +
                              network_.graph.vertices()[v].id +
                              "' fell below 1 kg");
    }
  }
  m.segment(layout_.num_hot, layout_.num_vertices) = mv;
  m.tail(layout_.num_edges) = params_.edge_mass;
  return m;
}

Eigen::MatrixXd ThermoHydraulicModel::tilde_a(
    const Eigen::VectorXd& chord_flows) const {
  const int nv = layout_.num_vertices;
  const int ne = layout_.num_edges;
  const DhgGraph& g = network_.graph;
  Eigen::VectorXd qe = cycle_map_ * chord_flows;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nv + ne, nv + ne);
  for (int e = 0; e < ne; ++e) {
    const int target = g.target(e);
    const int source = g.source(e);
    // Vertex rows: -diag(B+ q_e) T_v + B+ diag(q_e) T_e.
    a(target, target) -= qe(e);
    a(target, nv + e) += qe(e);
    // Edge rows: diag(q_e) B-^T T_v - diag(q_e) T_e.
    a(nv + e, source) += qe(e);
    a(nv + e, nv + e) -= qe(e);
  }
  return a;
}

PlantMatrices ThermoHydraulicModel::assemble(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& u) const {
  const int nh = layout_.num_hot;
  const int nv = layout_.num_vertices;
  const int ne = layout_.num_edges;
  const int nt = nv + ne;
  PlantMatrices out;
  out.mass = mass_diagonal(x);

  out.a = Eigen::MatrixXd::Zero(layout_.n(), layout_.n());
  out.a.bottomRightCorner(nt, nt) = tilde_a(u.head(layout_.num_chords));
  out.a.bottomRightCorner(nt, nt).diagonal() -= loss_;

  const double inv_cp = 1.0 / params_.heat_capacity;
  out.eu = Eigen::MatrixXd::Zero(layout_.n(), layout_.m());
  out.eu.topLeftCorner(nh, layout_.num_chords) = hot_cycle_map_;
  for (int k = 0; k < layout_.num_producers; ++k) {
    out.eu(layout_.edge_temperature(network_.producers[k]),
           layout_.producer_power(k)) = inv_cp;
  }

  out.ed = Eigen::MatrixXd::Zero(layout_.n(), layout_.p());
  for (int k = 0; k < layout_.num_consumers; ++k) {
    out.ed(layout_.edge_temperature(network_.consumers[k]), k) = -inv_cp;
  }
  out.ed.col(layout_.ambient()).segment(nh, nt) = loss_;
  return out;
}

Eigen::VectorXd ThermoHydraulicModel::balance(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& d) const {
  const int nh = layout_.num_hot;
  const int nv = layout_.num_vertices;
  const int ne = layout_.num_edges;
  const DhgGraph& g = network_.graph;
  const Eigen::VectorXd qc = u.head(layout_.num_chords);
  const Eigen::VectorXd qe = cycle_map_ * qc;
  const double ambient = d(layout_.ambient());
  const double inv_cp = 1.0 / params_.heat_capacity;

  Eigen::VectorXd r(layout_.n());
  r.head(nh) = hot_cycle_map_ * qc;
  auto tv = [&](int v) { return x(nh + v); };
  auto te = [&](int e) { return x(nh + nv + e); };
  for (int v = 0; v < nv; ++v) {
    double acc = -loss_(v) * (tv(v) - ambient);
    for (int e : in_edges_[v]) acc += qe(e) * (te(e) - tv(v));
    r(nh + v) = acc;
  }
  for (int e = 0; e < ne; ++e) {
    r(nh + nv + e) = qe(e) * (tv(g.source(e)) - te(e)) -
                     loss_(nv + e) * (te(e) - ambient);
  }
  for (int k = 0; k < layout_.num_producers; ++k) {
    r(nh + nv + network_.producers[k]) += u(layout_.producer_power(k)) * inv_cp;
  }
  for (int k = 0; k < layout_.num_consumers; ++k) {
    r(nh + nv + network_.consumers[k]) -= d(k) * inv_cp;
  }
  return r;
}

Eigen::VectorXd ThermoHydraulicModel::dynamics(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& d) const {
  return balance(x, u, d).cwiseQuotient(mass_diagonal(x));
}

Eigen::VectorXd ThermoHydraulicModel::euler_step(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& d,
                                                 double dt) const {
  if (!(dt > 0.0)) throw PlantError("euler_step: dt must be positive");
  return x + dt * dynamics(x, u, d);
}

Eigen::MatrixXd ThermoHydraulicModel::flow_sensitivity(
    const Eigen::VectorXd& x) const {
  const int nh = layout_.num_hot;
  const int nv = layout_.num_vertices;
  const int ne = layout_.num_edges;
  const DhgGraph& g = network_.graph;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nv + ne, layout_.num_chords);
  for (int i = 0; i < layout_.num_chords; ++i) {
    for (int e = 0; e < ne; ++e) {
      const double phi = cycle_map_(e, i);
      if (phi == 0.0) continue;
      const double t_edge = x(nh + nv + e);
      s(g.target(e), i) += phi * (t_edge - x(nh + g.target(e)));
      s(nv + e, i) += phi * (x(nh + g.source(e)) - t_edge);
    }
  }
  return s;
}

void ThermoHydraulicModel::jacobians(const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& d,
                                     Eigen::MatrixXd* dfdx,
                                     Eigen::MatrixXd* dfdu) const {
  const int nh = layout_.num_hot;
  const int nt = layout_.temperatures();
  const Eigen::VectorXd mass = mass_diagonal(x);
  const Eigen::VectorXd inv_mass = mass.cwiseInverse();

  if (dfdx != nullptr) {
    dfdx->setZero(layout_.n(), layout_.n());
    Eigen::MatrixXd temp = tilde_a(u.head(layout_.num_chords));
    temp.diagonal() -= loss_;
    dfdx->bottomRightCorner(nt, nt) =
        inv_mass.tail(nt).asDiagonal() * temp;
    // M depends on m_h through the storage layers.
    const Eigen::VectorXd r = balance(x, u, d);
    for (int t = 0; t < nh; ++t) {
      const int hot_row = layout_.vertex_temperature(network_.hot[t]);
      const int cold_row = layout_.vertex_temperature(network_.cold[t]);
      (*dfdx)(hot_row, layout_.hot_mass(t)) -=
          r(hot_row) / (mass(hot_row) * mass(hot_row));
      (*dfdx)(cold_row, layout_.hot_mass(t)) +=
          r(cold_row) / (mass(cold_row) * mass(cold_row));
    }
  }
  if (dfdu != nullptr) {
    dfdu->setZero(layout_.n(), layout_.m());
    dfdu->topLeftCorner(nh, layout_.num_chords) = hot_cycle_map_;
    dfdu->block(nh, 0, nt, layout_.num_chords) =
        inv_mass.tail(nt).asDiagonal() * flow_sensitivity(x);
    for (int k = 0; k < layout_.num_producers; ++k) {
      const int row = layout_.edge_temperature(network_.producers[k]);
      (*dfdu)(row, layout_.producer_power(k)) =
          inv_mass(row) / params_.heat_capacity;
    }
  }
}

Eigen::VectorXd ThermoHydraulicModel::make_disturbance(
    const Eigen::VectorXd& demands, double ambient) const {
  if (demands.size() != layout_.num_consumers) {
    throw PlantError("make_disturbance: one demand per consumer expected");
  }
  Eigen::VectorXd d(layout_.p());
  d.head(layout_.num_consumers) = demands;
  d(layout_.ambient()) = ambient;
  return d;
}

double ThermoHydraulicModel::heat_loss_fraction(const Eigen::VectorXd& u,
                                                const Eigen::VectorXd& d) const {
  const double injected = u.tail(layout_.num_producers).sum();
  if (!(injected > 0.0)) {
    throw PlantError("heat_loss_fraction: no heat is injected");
  }
  const double extracted = d.head(layout_.num_consumers).sum();
  return (injected - extracted) / injected;
}

double ThermoHydraulicModel::internal_energy(const Eigen::VectorXd& x) const {
  const int nh = layout_.num_hot;
  const Eigen::VectorXd mv = vertex_masses(x);
  double e = mv.dot(x.segment(nh, layout_.num_vertices)) +
             params_.edge_mass.dot(x.tail(layout_.num_edges));
  return params_.heat_capacity * e;
}

double ThermoHydraulicModel::heat_loss(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& d) const {
  const Eigen::ArrayXd excess =
      x.tail(layout_.temperatures()).array() - d(layout_.ambient());
  return params_.heat_capacity * (loss_.array() * excess).sum();
}

std::vector<std::string> ThermoHydraulicModel::state_names() const {
  const DhgGraph& g = network_.graph;
  std::vector<std::string> names;
  for (const auto& tes : g.tes_ids()) names.push_back("m_h_" + tes);
  for (const auto& v : g.vertices()) names.push_back("T_v_" + v.id);
  for (const auto& e : g.edges()) names.push_back("T_e_" + e.id);
  return names;
}

std::vector<std::string> ThermoHydraulicModel::input_names() const {
  const DhgGraph& g = network_.graph;
  std::vector<std::string> names;
  for (int c : network_.basis.chords) names.push_back("q_c_" + g.edges()[c].id);
  for (int e : network_.producers) names.push_back("P_pr_" + g.edges()[e].id);
  return names;
}

std::vector<std::string> ThermoHydraulicModel::disturbance_names() const {
  const DhgGraph& g = network_.graph;
  std::vector<std::string> names;
  for (int e : network_.consumers) names.push_back("P_d_" + g.edges()[e].id);
  names.push_back("T_a");
  return names;
}

EulerModel::EulerModel(const ThermoHydraulicModel& model, double dt)
    : model_(&model), dt_(dt) {
  if (!(dt > 0.0)) throw PlantError("EulerModel: dt must be positive");
}

Eigen::VectorXd EulerModel::step(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& d) const {
  return model_->euler_step(x, u, d, dt_);
}

void EulerModel::linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& d, Eigen::MatrixXd* a,
                           Eigen::MatrixXd* b) const {
  model_->jacobians(x, u, d, a, b);
  if (a != nullptr) {
    *a *= dt_;
    a->diagonal().array() += 1.0;
  }
  if (b != nullptr) *b *= dt_;
}

AffineModel::AffineModel(Eigen::MatrixXd a, Eigen::MatrixXd b,
                         Eigen::VectorXd x0, Eigen::VectorXd u0)
    : a_(std::move(a)), b_(std::move(b)), x0_(std::move(x0)), u0_(std::move(u0)) {
  if (a_.rows() != a_.cols() || b_.rows() != a_.rows() ||
      x0_.size() != a_.rows() || u0_.size() != b_.cols()) {
    throw PlantError("AffineModel: inconsistent dimensions");
  }
}

Eigen::VectorXd AffineModel::step(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& /*d*/) const {
  return x0_ + a_ * (x - x0_) + b_ * (u - u0_);
}

void AffineModel::linearize(const Eigen::VectorXd& /*x*/,
                            const Eigen::VectorXd& /*u*/,
                            const Eigen::VectorXd& /*d*/, Eigen::MatrixXd* a,
                            Eigen::MatrixXd* b) const {
  if (a != nullptr) *a = a_;
  if (b != nullptr) *b = b_;
}

}  // namespace dhgmpc
