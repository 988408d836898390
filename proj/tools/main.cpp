#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "dhgmpc/csv.hpp"
#include "dhgmpc/scenario.hpp"
#include "dhgmpc/topology.hpp"

namespace cli = dhgmpc::cli;

int main(int argc, char** argv) {
  CLI::App app{"District heating grid MPC: model checks, terminal synthesis "
               "and closed-loop runs"};
  app.require_subcommand(1);

  cli::CommonOptions common;
  common.log = cli::log_level_from_env();
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("scenario", common.scenario, "scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the scenario seed");
  };

  cli::CheckOptions check;
  auto* c_check = app.add_subcommand(
      "check", "dimensions, structural condition and stabilizing feedback");
  add_common(c_check);
  c_check->add_option("--dt", check.dt, "sampling time in s")
      ->check(CLI::PositiveNumber);

  auto* c_steady = app.add_subcommand("steady", "solve both steady states");
  add_common(c_steady);

  cli::TerminalCommandOptions term;
  auto* c_term = app.add_subcommand(
      "terminal", "synthesize terminal cost, gain and region");
  add_common(c_term);
  c_term->add_option("--setpoint", term.setpoint, "I, II or both")
      ->check(CLI::IsMember({"I", "II", "both"}));
  c_term->add_option("--out", term.out_dir, "output directory");

  cli::RunOptions run;
  auto add_run = [&run](CLI::App* sub) {
    sub->add_option("--out", run.out_dir, "output directory");
    sub->add_option("--terminal-dir", run.terminal_dir,
                    "directory with terminal files (default: --out)");
    sub->add_flag("--auto", run.auto_terminal,
                  "synthesize terminal ingredients instead of reading them");
    sub->add_option("--steps", run.steps, "override the number of steps");
  };
  auto* c_run = app.add_subcommand("run", "closed-loop simulation");
  add_common(c_run);
  add_run(c_run);
  c_run->add_option("--variant", run.variant, "mpc1, mpc2 or both")
      ->check(CLI::IsMember({"mpc1", "mpc2", "both"}));

  auto* c_compare =
      app.add_subcommand("compare", "run both variants and compare them");
  add_common(c_compare);
  add_run(c_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    if (*c_check) return cli::cmd_check(common, check, std::cout);
    if (*c_steady) return cli::cmd_steady(common, std::cout);
    if (*c_term) return cli::cmd_terminal(common, term, std::cout);
    if (*c_compare) run.variant = "both";
    return cli::cmd_run(common, run, std::cout);
  } catch (const dhgmpc::ScenarioError& e) {
    std::cerr << "dhgmpc: " << common.scenario << ": " << e.what() << '\n';
    return cli::kUsage;
  } catch (const dhgmpc::TopologyError& e) {
    std::cerr << "dhgmpc: " << common.scenario << ": " << e.what() << '\n';
    return cli::kUsage;
  } catch (const dhgmpc::CsvError& e) {
    std::cerr << "dhgmpc: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const cli::UsageError& e) {
    std::cerr << "dhgmpc: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "dhgmpc: numerical failure: " << e.what() << '\n';
    return cli::kNumerical;
  }
}
