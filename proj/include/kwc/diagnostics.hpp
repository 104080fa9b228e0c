#pragma once

// Checks of the proved properties on recorded trajectories. Every check is a
// pure function of the StepRecords, so a trajectory reloaded from CSV
// reproduces its report exactly.

#include <string>
#include <vector>

#include "kwc/energy.hpp"
#include "kwc/flow.hpp"

namespace kwc::diagnostics {

struct Violation {
  int step = 0;
  double excess = 0.0;  // F(s) + dissipation - F(0) - tol
};

/// F(U(s)) + theta sum_{t < s} |dU/dt|^2 dt <= F(U0) + tol at every record.
/// theta = 1 is the full inequality; explicit-type steps under the CFL bound
/// only certify theta = 1/2.
std::vector<Violation> check_energy_inequality(const flow::Trajectory& traj, double tol, double theta = 1.0);

/// Sum of the recorded dissipation increments.
double dissipation_total(const flow::Trajectory& traj);

/// max over records of max(-eta_min, eta_max - 1, 0).
double check_eta_bounds(const flow::Trajectory& traj);

struct GlCheck {
  double max_residual = 0.0;
  double bound = 0.0;        // sqrt(delta) F0
  double energy_bound = 0.0; // 2 sqrt(delta F0), the termwise estimate
  bool pass = false;         // max_residual <= bound (1 + slack)
};

inline constexpr double kGlSlack = 0.1;

GlCheck check_gl_residual(const flow::Trajectory& traj, double delta, double F0);

inline constexpr double kCapTol = 1e-3;

/// min over records of u1 / |u|.
double check_cap(const flow::Trajectory& traj);

/// Grade-2 residual of the multiplier-free form between consecutive states.
double check_wedge_form(const grid::FieldPair& U0, const grid::FieldPair& U1, double dt, const energy::Model& m);

struct Thresholds {
  double energy_tol = -1.0;  // < 0: #steps * 1e-8 * (1 + F0)
  double dissipation_weight = 1.0;
  double eta_tol = 1e-8;
  double sphere_tol = 0.0;   // constrained runs: exact unit norm after each step
  double cap_r = -1.0;       // < 0: skip the cap check
  double cap_tol = kCapTol;
  double tangency_tol = 1e-10;
};

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct DiagnosticsReport {
  std::vector<Violation> energy_violations;
  double gl_residual_max = 0.0;
  double sphere_residual_max = 0.0;  // constrained: post-step records only
  double cap_min_u1 = 1.0;
  double wedge_residual_max = 0.0;
  double mu_L1_norm = 0.0;           // time integral of the per-step L1 norms
  double dissipation_total = 0.0;
  std::vector<Check> checks;

  bool all_pass() const;
  /// Header `name,value,bound,pass` and one row per check.
  std::string to_csv() const;
  /// Parses the checks back; the aggregate fields are restored from them.
  static DiagnosticsReport from_csv(const std::string& text);
};

DiagnosticsReport report(const flow::Trajectory& traj, const energy::Model& m, const Thresholds& thresholds = {});

}  // namespace kwc::diagnostics
