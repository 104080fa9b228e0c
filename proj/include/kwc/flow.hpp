#pragma once

// Time integrators for the penalized gradient flow and its sphere-constrained
// limit, the fixed-step driver `evolve`, and the delta -> nu -> eps
// continuation driver.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kwc/energy.hpp"
#include "kwc/grid.hpp"

namespace kwc::flow {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CflViolation : public FlowError {
 public:
  using FlowError::FlowError;
};

class BlowUp : public FlowError {
 public:
  using FlowError::FlowError;
};

class SolverStagnation : public FlowError {
 public:
  SolverStagnation(const std::string& what, double residual) : FlowError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

enum class Scheme { Explicit, SemiImplicit, MinimizingMovement, Projected };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

struct StepperConfig {
  Scheme scheme = Scheme::SemiImplicit;
  double dt = 1e-4;
  double cfl_safety = 0.9;
  // Conjugate-gradient solves of the semi-implicit scheme.
  double cg_tol = 1e-10;
  int cg_max_iter = 5000;
  // Inner descent of the minimizing-movement scheme. mm_tol <= 0 selects
  // 1e-8 (1 + F(U0)) at the start of evolve.
  double mm_tol = 0.0;
  int mm_max_iter = 500;
};

/// Largest stable explicit step for the current state.
double dt_max(const grid::FieldPair& U, const energy::Model& m, Scheme scheme);

struct StepInfo {
  int inner_iterations = 0;
  double inner_residual = 0.0;
  double drift_max = 0.0;     // projected: max | |u + dt P| - 1 | before normalization
  double tangency_max = 0.0;  // projected: max |P . u| before normalization
};

struct StepResult {
  grid::FieldPair U;
  StepInfo info;
};

StepResult step_explicit(const grid::FieldPair& U, const energy::Model& m, double dt, double cfl_safety = 1.0);

/// Conjugate gradients for (I - c Lap) x = b, componentwise; x holds the
/// initial guess. Returns iterations; throws SolverStagnation on failure.
int solve_shifted_laplacian(double c, const grid::Field& b, grid::Field& x, double tol, int max_iter);

StepResult step_semi_implicit(const grid::FieldPair& U, const energy::Model& m, double dt, double cg_tol = 1e-10,
                              int cg_max_iter = 5000);

/// Approximate minimiser of F(V) + |V - U_prev|^2 / (2 dt). Only iterates
/// with J <= J(U_prev) are accepted, so F(U+) + |U+ - U_prev|^2/(2 dt) <= F(U_prev).
StepResult step_minimizing_movement(const grid::FieldPair& U_prev, const energy::Model& m, double dt, double tol,
                                    int max_iter = 500);

StepResult step_projected(const grid::FieldPair& U, const energy::Model& m, double dt, double cfl_safety = 1.0);

/// Per-record summary of a state, enough to rerun every diagnostic.
struct StepRecord {
  int step = 0;
  double time = 0.0;
  energy::EnergyBreakdown energy;
  double diss_increment = 0.0;  // sum of |dU|^2 / dt since the previous record
  double eta_min = 0.0;
  double eta_max = 0.0;
  double u_norm_max = 0.0;
  double sphere_residual = 0.0;  // max | |u| - 1 |
  double gl_residual = 0.0;      // || |u|^2 - 1 ||_L2
  double cap_min = 0.0;          // min u1 / |u|
  double mu_L1 = 0.0;
  double alphaB_max = 0.0;
  double wedge_residual = 0.0;   // projected runs, from the previous step
  double drift_max = 0.0;
  double tangency_max = 0.0;
  int inner_iterations = 0;

  static std::string csv_header();
  std::string csv_row() const;
  static StepRecord from_csv(const std::string& row);
};

struct Trajectory {
  std::vector<StepRecord> records;
  double dt = 0.0;
  energy::FlowMode mode = energy::FlowMode::Penalized;
  std::optional<grid::FieldPair> final_state;
  /// States at the requested checkpoint steps, in order.
  std::vector<grid::FieldPair> checkpoints;
};

struct EvolveOptions {
  int record_stride = 1;
  std::vector<int> checkpoint_steps;
  /// Called for every record (including step 0) with the recorded state.
  std::function<void(const StepRecord&, const grid::FieldPair&)> on_record;
};

energy::FlowMode mode_of(Scheme s);

/// Summary of one state (energy, bounds, multiplier); step/time/dissipation
/// and per-step solver data are filled in by evolve.
StepRecord summarize(const grid::FieldPair& U, const energy::Model& m, energy::FlowMode mode);

/// Fixed-step march from U0 to T with n = ceil(T / dt) steps of size T / n.
/// Step failures are rethrown as FlowError carrying the step index and time.
Trajectory evolve(const grid::FieldPair& U0, const energy::Model& m, const StepperConfig& cfg, double T,
                  const EvolveOptions& opts = {});

/// || (u1 - u0)/dt ^ u0 - div Z(U0) ^ u0 ||_L2, grade-2 residual of the
/// multiplier-free form of the constrained equation.
double wedge_residual(const grid::FieldPair& U0, const grid::FieldPair& U1, double dt, const energy::Model& m);

struct ContinuationSchedule {
  std::vector<double> deltas;
  std::vector<double> nus;
  std::vector<double> epss;
};

struct ContinuationConfig {
  ContinuationSchedule schedule;
  double T = 0.5;
  Scheme penalized_scheme = Scheme::SemiImplicit;
  StepperConfig stepper;     // dt <= 0: choose cfl_safety * dt_max per stage
  int checkpoints = 4;       // matched comparison times k T / checkpoints
};

struct LevelResult {
  std::string stage;         // delta | nu | eps
  double value = 0.0;
  bool ok = false;
  std::string error;
  double F0 = 0.0;
  double gl_residual = 0.0;  // max over records
  double gl_bound = 0.0;     // sqrt(delta) F0
  double distance_prev = -1; // max over matched times; < 0 when undefined
  double final_energy = 0.0;
  double nu_term = 0.0;
  double weighted_tv = 0.0;
  double grad_u_L1 = 0.0;
  double dt = 0.0;
  Trajectory trajectory;
};

struct ContinuationReport {
  std::vector<LevelResult> levels;
  std::optional<double> delta_slope;  // log-log fit of gl_residual vs delta
};

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// L1 norm of |grad u| (Frobenius per cell).
double grad_u_L1(const grid::FieldPair& U);

ContinuationReport continuation(const grid::FieldPair& U0, const energy::Model& base, const ContinuationConfig& cfg,
                                const std::function<void(const LevelResult&)>& on_level = {});

}  // namespace kwc::flow
