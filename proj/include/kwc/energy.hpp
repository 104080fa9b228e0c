#pragma once

// Discrete free energies of the orientation phase-field model and their
// first variations.
//
//   F(eta, u) = 1/2 |grad eta|^2 + G(eta) + alpha(eta) f_eps(grad u)
//             + kappa^2/2 |grad u|^2 + 1/(N+1) |nu grad u|^(N+1) + Pi_delta(u)
//
// integrated with the grid quadrature. Because `div` is the exact negative
// adjoint of `grad`, flow_rhs in penalized mode is exactly minus the L2
// gradient of energy_total.

#include <cstdint>
#include <string>

#include "kwc/grid.hpp"
#include "kwc/model.hpp"

namespace kwc::energy {

struct Model {
  model::ModelParams params;
  model::ModelFunctions funcs;
};

struct EnergyBreakdown {
  double dirichlet_eta = 0.0;
  double potential_G = 0.0;
  double weighted_tv = 0.0;
  double dirichlet_u = 0.0;
  double nu_term = 0.0;
  double gl_term = 0.0;
  double total = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
  /// Parses one csv_row(); throws std::invalid_argument on malformed input.
  static EnergyBreakdown from_csv(const std::string& row);
};

/// Tolerance on | |u| - 1 | for states on the constraint set.
inline constexpr double kSphereTol = 1e-8;

/// delta = 0 evaluates the constrained energy: the penalty is 0 on the
/// sphere and states off it are rejected.
EnergyBreakdown energy_total(const grid::FieldPair& U, const Model& m);

/// 1/2 |grad eta|^2 + 1/2 (kappa f_eps + alpha/kappa)^2 + 1/(N+1)|nu grad u|^(N+1)
/// + |u|^4/(4 delta): the convex part of the penalized energy.
double energy_convex_part(const grid::FieldPair& U, const Model& m);

/// F - convex part = int G - alpha^2/(2 kappa^2) - kappa^2 eps^2/2 + Pi_delta - |u|^4/(4 delta).
double energy_nonconvex_part(const grid::FieldPair& U, const Model& m);

/// Pointwise [g - alpha alpha'/kappa^2, -u/delta].
grid::FieldPair perturbation(const grid::FieldPair& U, const Model& m);

enum class FlowMode { Penalized, Constrained };

struct FlowRHS {
  grid::Field d_eta;
  grid::Field d_u;
  /// alpha(eta) B + kappa^2 grad u + nu^(N+1) |grad u|^(N-1) grad u
  grid::GradField flux_Z;
  /// Constrained mode only: multiplier -u . div Z per cell (the discrete
  /// projection), and the collocated Z : grad u it approximates.
  grid::Field mu;
  grid::Field mu_collocated;
};

FlowRHS flow_rhs(const grid::FieldPair& U, const Model& m, FlowMode mode);

/// Max relative error between -<flow_rhs, e> and central differences of
/// energy_total over `probes` random single-entry perturbations. Near-zero
/// entries whose absolute disagreement is below 1e-8 vol (1 + F/|Omega|)
/// count as exact.
double grad_check(const grid::FieldPair& U, const Model& m, std::uint64_t seed, int probes = 50,
                  double step = 1e-5);

}  // namespace kwc::energy
