#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "dhgmpc/scenario.hpp"
#include "support.hpp"

namespace dhgmpc {
namespace {

std::string canonical_text() {
  std::ifstream in(testing::canonical_path());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Replaces the first line that starts with `prefix`.
std::string with_line(const std::string& prefix, const std::string& line) {
  std::string text = canonical_text();
  const std::size_t at = text.find("\n" + prefix);
  EXPECT_NE(at, std::string::npos) << prefix;
  const std::size_t end = text.find('\n', at + 1);
  return text.replace(at + 1, end - at - 1, line);
}

int line_of(const std::string& prefix) {
  const std::string text = canonical_text();
  const std::size_t at = text.find("\n" + prefix);
  return 2 + static_cast<int>(std::count(text.begin(), text.begin() + at, '\n'));
}

int error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.line();
  }
  return -1;
}

TEST(Scenario, CanonicalValues) {
  const Scenario& sc = testing::canonical_scenario();
  EXPECT_EQ(sc.graph.num_vertices(), 7);
  EXPECT_EQ(sc.graph.num_edges(), 9);
  EXPECT_EQ(sc.mpc.horizon, 60);
  EXPECT_EQ(sc.mpc.k_step, 90);
  EXPECT_EQ(sc.mpc.n_sim, 180);
  EXPECT_EQ(sc.mpc.dt, 60.0);
  EXPECT_EQ(sc.physics.tes_mass.at("tes1"), 20000.0);
  EXPECT_EQ(sc.setpoints[1].demands.size(), 3u);
  EXPECT_EQ(sc.physics.kappa_units, KappaUnits::kMassFlow);
}

TEST(Scenario, SerializeRoundTrip) {
  const Scenario& sc = testing::canonical_scenario();
  const std::string text = serialize_scenario(sc);
  const Scenario back = parse_scenario(text);
  EXPECT_EQ(back, sc);
  EXPECT_EQ(serialize_scenario(back), text);
}

TEST(Scenario, RoundTripKeepsAwkwardDoubles) {
  Scenario sc = testing::canonical_scenario();
  sc.physics.density = 0.1 + 0.2;
  sc.mpc.qstar_factor = 1.0 + 1e-15;
  sc.physics.kappa_units = KappaUnits::kPower;
  sc.seed = 18446744073709551557ull >> 1;
  EXPECT_EQ(parse_scenario(serialize_scenario(sc)), sc);
}

TEST(Scenario, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line(with_line("density", "density 988.05")), line_of("density"));
  EXPECT_EQ(error_line(with_line("friction", "friction = abc")), line_of("friction"));
  EXPECT_EQ(error_line(with_line("friction", "frikshun = 0.02")), line_of("friction"));
  EXPECT_EQ(error_line(with_line("horizon", "horizon = 6.5")), line_of("horizon"));
  EXPECT_EQ(error_line(with_line("kappa_units", "kappa_units = watts")),
            line_of("kappa_units"));
  EXPECT_EQ(error_line(with_line("[mpc]", "[controller]")), line_of("[mpc]"));
  EXPECT_EQ(error_line(with_line("friction", "density = 1000")), line_of("friction"));
}

TEST(Scenario, GraphErrorsPointAtTheSection) {
  const std::string text =
      with_line("edge e9", "edge e9 pipe v4 v99");
  EXPECT_GT(error_line(text), 0);
  EXPECT_THROW(parse_scenario(with_line("edge e9", "edge e9 pipe v4")), ScenarioError);
}

TEST(Scenario, CrossFieldChecks) {
  EXPECT_THROW(parse_scenario(with_line("k_step", "k_step = 30")), ScenarioError);
  EXPECT_THROW(parse_scenario(with_line("dt", "dt = 0")), ScenarioError);
  EXPECT_THROW(parse_scenario(with_line("tes_mass.tes2", "# removed")),
               ScenarioError);
  Scenario sc = testing::canonical_scenario();
  sc.mpc.n_sim = sc.mpc.k_step;
  EXPECT_THROW(validate_scenario(sc), std::invalid_argument);
}

TEST(Scenario, MissingSectionAndFile) {
  std::string text = canonical_text();
  text = text.substr(0, text.find("[setpoint.II]"));
  EXPECT_EQ(error_line(text), 0);
  EXPECT_THROW(load_scenario("/nonexistent/x.scn"), ScenarioError);
}

TEST(Scenario, CommentsAndBlankLinesAreIgnored) {
  const std::string text = "# header\n\n" + canonical_text() + "\n# trailing\n";
  EXPECT_EQ(parse_scenario(text), testing::canonical_scenario());
}

}  // namespace
}  // namespace dhgmpc
