#pragma once

#include <array>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "dhgmpc/case_study.hpp"
#include "dhgmpc/scenario.hpp"
#include "dhgmpc/terminal.hpp"

namespace dhgmpc::testing {

std::string canonical_path();
std::string data_path(const std::string& name);

// Built once per process and shared; treat as read-only.
const Scenario& canonical_scenario();
const CaseStudy& canonical();
const std::array<TerminalIngredients, 2>& canonical_terminals();

// Central differences of a vector function, step h_i = rel * scale_i.
Eigen::MatrixXd central_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& at, const Eigen::VectorXd& scale, double rel);

// max |a - b| / max(1, max |b|), entrywise on the worst entry.
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Unconstrained finite-horizon LQ on x+ = A x + B u by backward Riccati
// recursion with stage weights Q, R and terminal weight Pn. Costs are
// x'Qx + u'Ru; returns the optimal inputs from x0.
std::vector<Eigen::VectorXd> riccati_lq(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b,
                                        const Eigen::MatrixXd& q,
                                        const Eigen::MatrixXd& r,
                                        const Eigen::MatrixXd& pn,
                                        const Eigen::VectorXd& x0,
                                        int horizon);

}  // namespace dhgmpc::testing
