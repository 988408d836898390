#include "support.hpp"

#include <algorithm>

namespace dhgmpc::testing {

std::string canonical_path() { return DHGMPC_CANONICAL; }

std::string data_path(const std::string& name) {
  return std::string(DHGMPC_TEST_DATA) + "/" + name;
}

const Scenario& canonical_scenario() {
  static const Scenario sc = load_scenario(canonical_path());
  return sc;
}

const CaseStudy& canonical() {
  static const CaseStudy cs = build_case_study(canonical_scenario());
  return cs;
}

const std::array<TerminalIngredients, 2>& canonical_terminals() {
  static const std::array<TerminalIngredients, 2> t = {
      synthesize_case_terminal(canonical(), 0),
      synthesize_case_terminal(canonical(), 1)};
  return t;
}

Eigen::MatrixXd central_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& at, const Eigen::VectorXd& scale, double rel) {
  const Eigen::VectorXd f0 = f(at);
  Eigen::MatrixXd j(f0.size(), at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double h = rel * scale(i);
    Eigen::VectorXd xp = at;
    Eigen::VectorXd xm = at;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double ref = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / ref;
}

std::vector<Eigen::VectorXd> riccati_lq(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b,
                                        const Eigen::MatrixXd& q,
                                        const Eigen::MatrixXd& r,
                                        const Eigen::MatrixXd& pn,
                                        const Eigen::VectorXd& x0,
                                        int horizon) {
  std::vector<Eigen::MatrixXd> gains(horizon);
  Eigen::MatrixXd p = pn;
  for (int k = horizon - 1; k >= 0; --k) {
    const Eigen::MatrixXd s = r + b.transpose() * p * b;
    gains[k] = s.ldlt().solve(b.transpose() * p * a);
    p = q + a.transpose() * p * (a - b * gains[k]);
    p = 0.5 * (p + p.transpose()).eval();
  }
  std::vector<Eigen::VectorXd> u(horizon);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < horizon; ++k) {
    u[k] = -gains[k] * x;
    x = a * x + b * u[k];
  }
  return u;
}

}  // namespace dhgmpc::testing
