#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "dhgmpc/plant.hpp"
#include "dhgmpc/simulation.hpp"

namespace dhgmpc {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// One row per step: k, t, references, every state, input and disturbance by
/// name, solver statistics and bound flags. Wall time is left out so that
/// identical runs give identical files.
void write_trajectory_csv(std::ostream& os, const ThermoHydraulicModel& model,
                          const ClosedLoopResult& result);

/// k, solve_seconds, sqp_iterations, qp_iterations.
void write_timing_csv(std::ostream& os, const ClosedLoopResult& result);

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);
/// Throws CsvError on ragged rows or non-numeric cells.
Eigen::MatrixXd read_matrix_csv(std::istream& is);

/// "key = value" lines; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;
void write_key_values(std::ostream& os, const KeyValues& kv);
KeyValues read_key_values(std::istream& is);

}  // namespace dhgmpc
