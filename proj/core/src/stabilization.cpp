#include "dhgmpc/stabilization.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dhgmpc {

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_radius: eigenvalue iteration failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

LinearizedModel linearize(const ThermoHydraulicModel& model,
                          const SteadyState& ss, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("linearize: dt must be > 0");
  const StateLayout& lay = model.layout();
  const int n = lay.n();
  const int nh = lay.num_hot;
  const int nt = lay.temperatures();

  LinearizedModel lin;
  lin.dt = dt;
  const PlantMatrices pm = model.assemble(ss.x, ss.u);
  lin.mass = pm.mass;
  const Eigen::VectorXd inv_mass = pm.mass.cwiseInverse();
  lin.flow_sens = model.flow_sensitivity(ss.x);

  lin.a = Eigen::MatrixXd::Identity(n, n) + dt * inv_mass.asDiagonal() * pm.a;
  Eigen::MatrixXd bc = pm.eu;
  bc.block(nh, 0, nt, lay.num_chords) += lin.flow_sens;
  lin.b = dt * inv_mass.asDiagonal() * bc;

  Eigen::MatrixXd exact;
  model.jacobians(ss.x, ss.u, ss.d, &exact, nullptr);
  exact = Eigen::MatrixXd::Identity(n, n) + dt * exact;
  lin.mass_dependence_gap = (exact - lin.a).cwiseAbs().maxCoeff();
  return lin;
}

StabilizingFeedback construct_feedback(const LinearizedModel& lin,
                                       const Eigen::MatrixXd& right_inverse,
                                       int num_hot, double epsilon) {
  const Eigen::Index n = lin.a.rows();
  const Eigen::Index m = lin.b.cols();
  const Eigen::Index nc = right_inverse.rows();
  if (right_inverse.cols() != num_hot || lin.flow_sens.cols() != nc ||
      lin.flow_sens.rows() != n - num_hot) {
    throw std::invalid_argument("construct_feedback: inconsistent dimensions");
  }
  StabilizingFeedback fb;
  fb.epsilon = epsilon;
  fb.g = Eigen::MatrixXd::Zero(m, n);
  fb.g.topLeftCorner(nc, num_hot) = -epsilon * right_inverse;
  fb.g.topRightCorner(nc, n - num_hot) =
      epsilon * right_inverse * (lin.flow_sens * right_inverse).transpose();

  const Eigen::MatrixXd ad = lin.a + lin.b * fb.g;
  fb.spectral_radius = spectral_radius(ad);
  const Eigen::MatrixXd lyap = ad.transpose() * lin.mass.asDiagonal() * ad -
                               Eigen::MatrixXd(lin.mass.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (lyap + lyap.transpose()), Eigen::EigenvaluesOnly);
  fb.lyapunov_max_eig = es.eigenvalues().maxCoeff();
  return fb;
}

StabilizingFeedback auto_select_epsilon(const LinearizedModel& lin,
                                        const Eigen::MatrixXd& right_inverse,
                                        int num_hot) {
  double best_radius = INFINITY;
  for (int k = 0; k <= 40; ++k) {
    const double eps = std::ldexp(1.0, -k);
    StabilizingFeedback fb = construct_feedback(lin, right_inverse, num_hot, eps);
    if (fb.stable()) return fb;
    best_radius = std::min(best_radius, fb.spectral_radius);
  }
  std::ostringstream os;
  os << "no epsilon in {1, 1/2, ..., 2^-40} stabilizes the linearization at dt="
     << lin.dt << " (smallest spectral radius " << best_radius << ")";
  throw StabilizabilityError(os.str());
}

}  // namespace dhgmpc
