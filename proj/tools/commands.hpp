#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace dhgmpc::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

// Bad input that is not a parse error of the scenario itself: missing or
// stale terminal files, unwritable output directory.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

// DHGMPC_LOG = quiet | info | debug; unset means info.
LogLevel log_level_from_env();

struct CommonOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  LogLevel log = LogLevel::kInfo;
};

struct CheckOptions {
  std::optional<double> dt;
};

struct TerminalCommandOptions {
  std::string setpoint = "both";  // I, II or both
  std::string out_dir = ".";
};

struct RunOptions {
  std::string variant = "mpc1";  // mpc1, mpc2 or both
  std::string out_dir = ".";
  std::string terminal_dir;  // empty: same as out_dir
  bool auto_terminal = false;
  std::optional<int> steps;
};

// Each command writes its report to `out` and returns the exit code. Parse
// and file errors escape as exceptions; main maps them.
int cmd_check(const CommonOptions& common, const CheckOptions& opt,
              std::ostream& out);
int cmd_steady(const CommonOptions& common, std::ostream& out);
int cmd_terminal(const CommonOptions& common,
                 const TerminalCommandOptions& opt, std::ostream& out);
int cmd_run(const CommonOptions& common, const RunOptions& opt,
            std::ostream& out);

}  // namespace dhgmpc::cli
