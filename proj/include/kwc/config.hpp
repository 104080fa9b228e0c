#pragma once

// Run configuration: line-based `key = value` files with `#` comments and
// `[section]` headers (keys become `section.key`).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kwc/diagnostics.hpp"
#include "kwc/energy.hpp"
#include "kwc/flow.hpp"
#include "kwc/grid.hpp"

namespace kwc::config {

/// Carries the offending key (or "line N") so the CLI can name it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct Entry {
  std::string value;
  int line = 0;
};

using RawConfig = std::map<std::string, Entry>;

/// Parses the whole text or throws on the first malformed line.
RawConfig parse(const std::string& text);
RawConfig parse_file(const std::filesystem::path& path);

struct RunConfig {
  std::uint64_t seed = 0;
  energy::Model model{model::ModelParams{}, model::default_model_functions(model::AlphaVariant::Quadratic)};
  std::vector<int> dims;
  double h = 0.0;
  grid::InitialSpec initial;
  flow::StepperConfig stepper;
  bool dt_auto = false;  // dt = cfl_safety * dt_max(U0), or 1/(2 R0) for minimizing movement
  std::filesystem::path out_dir;
  int record_stride = 1;
  int snapshot_stride = 0;  // 0: initial and final state only
  flow::ContinuationSchedule schedule;
  flow::Scheme penalized_scheme = flow::Scheme::SemiImplicit;
  int checkpoints = 4;
  double cap_r = -1.0;     // diagnostics cap check; < 0 disables
  double energy_tol = -1.0;

  grid::Grid grid() const;
  /// Canonical `key = value` listing of every setting; parses back to an
  /// identical RunConfig.
  std::string to_text() const;
};

enum class Purpose { Run, Continuation };

/// Keys every run must set, in the order missing ones are reported.
const std::vector<std::string>& required_keys(Purpose purpose);

/// Validates everything before any compute; throws ConfigError naming the key.
RunConfig resolve(const RawConfig& raw, Purpose purpose);

/// Time step actually used for the given initial state.
double resolved_dt(const RunConfig& cfg, const grid::FieldPair& U0);

/// Diagnostics thresholds matching the configured scheme.
diagnostics::Thresholds thresholds_for(const RunConfig& cfg);

}  // namespace kwc::config
