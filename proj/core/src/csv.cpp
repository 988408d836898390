#include "dhgmpc/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace dhgmpc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, int line) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw CsvError("line " + std::to_string(line) + ": '" + t +
                   "' is not a number");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_trajectory_csv(std::ostream& os, const ThermoHydraulicModel& model,
                          const ClosedLoopResult& result) {
  const auto xs = model.state_names();
  const auto us = model.input_names();
  const auto ds = model.disturbance_names();
  os << "k,t,stage_reference,terminal_reference";
  for (const auto& n : xs) os << ',' << n;
  for (const auto& n : us) os << ',' << n;
  for (const auto& n : ds) os << ',' << n;
  os << ",objective,terminal_cost,sqp_iterations,kkt,state_violation,"
        "input_violation,mass_error";
  for (const auto& n : us) os << ",bound_" << n;
  os << '\n';
  for (const StepRecord& r : result.steps) {
    os << r.k << ',' << format_double(r.t) << ',' << r.stage_reference << ','
       << r.terminal_reference;
    for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << format_double(r.x(i));
    for (Eigen::Index i = 0; i < r.u.size(); ++i) os << ',' << format_double(r.u(i));
    for (Eigen::Index i = 0; i < r.d.size(); ++i) os << ',' << format_double(r.d(i));
    os << ',' << format_double(r.objective) << ','
       << format_double(r.terminal_cost) << ',' << r.sqp_iterations << ','
       << format_double(r.kkt) << ',' << format_double(r.state_violation)
       << ',' << format_double(r.input_violation) << ','
       << format_double(r.mass_error);
    for (Eigen::Index i = 0; i < r.input_bound.size(); ++i) {
      os << ',' << r.input_bound(i);
    }
    os << '\n';
  }
}

void write_timing_csv(std::ostream& os, const ClosedLoopResult& result) {
  os << "k,solve_seconds,sqp_iterations,qp_iterations\n";
  for (const StepRecord& r : result.steps) {
    os << r.k << ',' << format_double(r.solve_seconds) << ','
       << r.sqp_iterations << ',' << r.qp_iterations << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_cell(cell, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw CsvError("line " + std::to_string(lineno) + ": expected " +
                     std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("empty matrix file");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

KeyValues read_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CsvError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || !kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw CsvError("line " + std::to_string(lineno) +
                     ": empty or duplicate key '" + key + "'");
    }
  }
  return kv;
}

}  // namespace dhgmpc
