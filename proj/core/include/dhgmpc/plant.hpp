#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhgmpc/topology.hpp"

namespace dhgmpc {

class PlantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a vertex mass drops below the 1 kg floor, which would make
/// the mass matrix singular.
class SingularMassError : public PlantError {
 public:
  using PlantError::PlantError;
};

/// How the loss coefficients enter the energy balance. kMassFlow adds them
/// next to the mass flows (kg/s); kPower treats them as kW/K and divides by
/// the heat capacity like every heat flow.
enum class KappaUnits { kMassFlow, kPower };

struct PlantParameters {
  double density = 988.05;     // kg/m^3
  double heat_capacity = 4.18;  // kJ/(kg K)
  double friction = 0.02;
  double ambient = 10.0;  // degC
  KappaUnits kappa_units = KappaUnits::kMassFlow;

  Eigen::VectorXd kappa_vertex;   // per vertex
  Eigen::VectorXd kappa_edge;     // per edge
  Eigen::VectorXd tes_mass;       // per storage, kg
  Eigen::VectorXd junction_mass;  // per vertex, read only for junctions
  Eigen::VectorXd edge_length;    // m
  Eigen::VectorXd edge_diameter;  // m
  Eigen::VectorXd edge_mass;      // kg
};

/// Diameter at which the Darcy-Weisbach gradient lambda/d * rho v^2 / 2
/// equals `gradient` (Pa/m) for mass flow `flow` (kg/s). Bisection on
/// [1 mm, 2 m].
double size_pipe(double flow, double gradient, double friction,
                 double density);

/// Sizes every listed edge; `flows` holds one mass flow per edge.
Eigen::VectorXd size_pipes(const Eigen::VectorXd& flows, double gradient,
                           double friction, double density);

double darcy_weisbach_gradient(double flow, double diameter, double friction,
                               double density);

/// Water mass of each edge, rho * pi d^2 / 4 * L.
Eigen::VectorXd edge_masses(const Eigen::VectorXd& lengths,
                            const Eigen::VectorXd& diameters, double density);

/// Position of each physical quantity inside x, u and d.
struct StateLayout {
  int num_hot = 0;
  int num_vertices = 0;
  int num_edges = 0;
  int num_chords = 0;
  int num_producers = 0;
  int num_consumers = 0;

  int n() const { return num_hot + num_vertices + num_edges; }
  int m() const { return num_chords + num_producers; }
  int p() const { return num_consumers + 1; }
  int temperatures() const { return num_vertices + num_edges; }

  int hot_mass(int i) const { return i; }
  int vertex_temperature(int v) const { return num_hot + v; }
  int edge_temperature(int e) const { return num_hot + num_vertices + e; }
  int chord_flow(int c) const { return c; }
  int producer_power(int k) const { return num_chords + k; }
  int consumer_demand(int k) const { return k; }
  int ambient() const { return num_consumers; }
};

/// Dense matrices of M(x) xdot = A x + E_u u + E_d d.
struct PlantMatrices {
  Eigen::VectorXd mass;  // diagonal of M
  Eigen::MatrixXd a;
  Eigen::MatrixXd eu;
  Eigen::MatrixXd ed;
};

/// Continuous-time thermo-hydraulic model
///   x = (m_h, T_v, T_e),  u = (q_c, P_pr),  d = (P_d, T_a).
/// Heat flows are divided by c_p internally so every energy row is in
/// kg K / s.
class ThermoHydraulicModel {
 public:
  ThermoHydraulicModel(Network network, PlantParameters params);

  const Network& network() const { return network_; }
  const PlantParameters& params() const { return params_; }
  const StateLayout& layout() const { return layout_; }
  int n() const { return layout_.n(); }
  int m() const { return layout_.m(); }
  int p() const { return layout_.p(); }

  /// F^T as a dense |E| x |F| matrix.
  const Eigen::MatrixXd& cycle_map() const { return cycle_map_; }
  /// (B)_{V_h} F^T.
  const Eigen::MatrixXd& hot_cycle_map() const { return hot_cycle_map_; }
  /// Loss coefficients in model units, vertices then edges.
  const Eigen::VectorXd& loss() const { return loss_; }

  Eigen::VectorXd edge_flows(const Eigen::VectorXd& u) const;
  Eigen::VectorXd vertex_masses(const Eigen::VectorXd& x) const;
  /// Diagonal of M(x). Throws SingularMassError below 1 kg.
  Eigen::VectorXd mass_diagonal(const Eigen::VectorXd& x) const;

  /// Temperature block A~(q_c), size (|V|+|E|)^2.
  Eigen::MatrixXd tilde_a(const Eigen::VectorXd& chord_flows) const;
  PlantMatrices assemble(const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u) const;

  /// A x + E_u u + E_d d, evaluated without forming matrices.
  Eigen::VectorXd balance(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& d) const;
  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& d) const;
  Eigen::VectorXd euler_step(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u,
                             const Eigen::VectorXd& d, double dt) const;

  /// Exact partial derivatives of f, including the dependence of M on m_h.
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& d, Eigen::MatrixXd* dfdx,
                 Eigen::MatrixXd* dfdu) const;

  /// Columns A~(e_i) T for every chord i, size (|V|+|E|) x |F|.
  Eigen::MatrixXd flow_sensitivity(const Eigen::VectorXd& x) const;

  Eigen::VectorXd make_disturbance(const Eigen::VectorXd& demands,
                                   double ambient) const;
  /// (sum P_pr - sum P_d) / sum P_pr.
  double heat_loss_fraction(const Eigen::VectorXd& u,
                            const Eigen::VectorXd& d) const;
  /// Total internal energy c_p * sum(m T) in kJ.
  double internal_energy(const Eigen::VectorXd& x) const;
  /// Loss to ambient in kW.
  double heat_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const;

  std::vector<std::string> state_names() const;
  std::vector<std::string> input_names() const;
  std::vector<std::string> disturbance_names() const;

 private:
  Network network_;
  PlantParameters params_;
  StateLayout layout_;
  Eigen::MatrixXd cycle_map_;
  Eigen::MatrixXd hot_cycle_map_;
  Eigen::VectorXd loss_;
  std::vector<int> tes_of_vertex_;  // storage index or -1
  std::vector<std::vector<int>> in_edges_;
};

/// Discrete-time model used by the optimizer and the closed loop.
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u,
                               const Eigen::VectorXd& d) const = 0;
  virtual void linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& d, Eigen::MatrixXd* a,
                         Eigen::MatrixXd* b) const = 0;
};

/// x(k+1) = x(k) + dt f(x(k), u(k), d(k)).
class EulerModel final : public DiscreteModel {
 public:
  EulerModel(const ThermoHydraulicModel& model, double dt);

  int state_dim() const override { return model_->n(); }
  int input_dim() const override { return model_->m(); }
  double dt() const { return dt_; }
  const ThermoHydraulicModel& continuous() const { return *model_; }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& d) const override;
  void linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& d, Eigen::MatrixXd* a,
                 Eigen::MatrixXd* b) const override;

 private:
  const ThermoHydraulicModel* model_;
  double dt_;
};

/// x(k+1) = x0 + A (x - x0) + B (u - u0); the disturbance is ignored.
class AffineModel final : public DiscreteModel {
 public:
  AffineModel(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::VectorXd x0,
              Eigen::VectorXd u0);

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int input_dim() const override { return static_cast<int>(b_.cols()); }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& d) const override;
  void linearize(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& d, Eigen::MatrixXd* a,
                 Eigen::MatrixXd* b) const override;

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
  Eigen::VectorXd x0_;
  Eigen::VectorXd u0_;
};

}  // namespace dhgmpc
