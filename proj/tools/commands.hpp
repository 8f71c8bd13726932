#pragma once

#include "scenario.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mfglab {

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kUsageError = 2, kSolverFailure = 3 };

ExitCode exit_code_for(mfg::ErrorCode code);

enum class Format { Csv, Svg, Both };

struct CommandOptions {
  std::string out;  // report file, binary output or output directory
  Format format = Format::Both;
};

// Each command prints a human-readable summary to `out` and returns an exit
// code. Library errors propagate as mfg::MfgError; run_cli maps them.
int cmd_check_monotone(const Scenario& s, const CommandOptions& opt, std::ostream& out);
int cmd_solve_mkv(const Scenario& s, const CommandOptions& opt, std::ostream& out);
int cmd_chaos_study(const Scenario& s, const CommandOptions& opt, std::ostream& out);
int cmd_lq_validate(const Scenario& s, std::ostream& out);
int cmd_rate_table(int n, double q, const std::vector<int>& Ns, std::ostream& out);

struct ValidationRow {
  std::string name;
  double value = 0.0, oracle = 0.0, error = 0.0, tolerance = 0.0;
  bool pass = true;
};
// The oracle-versus-solver table behind cmd_lq_validate.
std::vector<ValidationRow> lq_validation(const Scenario& s);

// Parses argv and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfglab
