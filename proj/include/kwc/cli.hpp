#pragma once

// Command-line front end: run, continuation, check <dir>, selftest.
//
// Files written by `run` into output.dir:
//   config.resolved  canonical configuration (re-read by `check`)
//   energy.csv       step,time,<energy breakdown>,diss_increment
//   stats.csv        one StepRecord per recorded step
//   snapshots/       step_<k>.bin at the snapshot stride, plus first and last
//   report.csv       diagnostics: name,value,bound,pass

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kwc/config.hpp"

namespace kwc::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3, kCheckFailure = 4 };

int cmd_run(const config::RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_continuation(const config::RunConfig& cfg, std::ostream& out, std::ostream& err);
/// Reloads a run directory, recomputes the report and compares it with
/// report.csv byte for byte; kCheckFailure on mismatch or failed checks.
int cmd_check(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_selftest(const std::vector<std::string>& suites, std::uint64_t seed, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; never throws.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kwc::cli
