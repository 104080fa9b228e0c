#include "kwc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "kwc/exterior.hpp"

namespace kwc::flow {

using energy::FlowMode;
using energy::Model;
using grid::Field;
using grid::FieldPair;
using grid::GradField;

namespace {

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

bool all_finite(const FieldPair& U) {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(U.eta.data) && ok(U.u.data);
}

double max_grad_norm(const GradField& gu, double* min_nonzero = nullptr) {
  double gmax = 0.0;
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < gu.grid.ncells(); ++c) {
    const double n = std::sqrt(sq_norm(gu.at(c)));
    gmax = std::max(gmax, n);
    if (n >= 1e-14) gmin = std::min(gmin, n);
  }
  if (min_nonzero) *min_nonzero = gmin;
  return gmax;
}

// vol * sum (a - b)^2 over both fields.
double sq_distance(const FieldPair& a, const FieldPair& b) {
  const double d = grid::distance(a, b);
  return d * d;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

Scheme parse_scheme(const std::string& name) {
  if (name == "explicit") return Scheme::Explicit;
  if (name == "semi-implicit") return Scheme::SemiImplicit;
  if (name == "minimizing-movement") return Scheme::MinimizingMovement;
  if (name == "projected-constrained" || name == "projected") return Scheme::Projected;
  throw std::invalid_argument("unknown stepper scheme '" + name + "'");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Explicit: return "explicit";
    case Scheme::SemiImplicit: return "semi-implicit";
    case Scheme::MinimizingMovement: return "minimizing-movement";
    case Scheme::Projected: return "projected-constrained";
  }
  return "?";
}

FlowMode mode_of(Scheme s) { return s == Scheme::Projected ? FlowMode::Constrained : FlowMode::Penalized; }

double dt_max(const FieldPair& U, const Model& m, Scheme scheme) {
  const auto& p = m.params;
  const auto& f = m.funcs;
  const int N = U.grid().dimN();
  const double h = U.grid().h_min();
  double gmin = 0.0;
  const double gmax = max_grad_norm(grid::grad(U.u), &gmin);

  double tv = 0.0;
  if (p.eps > 0.0) {
    tv = f.alpha_max() / p.eps;
  } else if (std::isfinite(gmin)) {
    tv = f.alpha_max() / gmin;
  }
  const double nu_stiff = p.nu > 0.0 ? std::pow(p.nu, p.nu_exponent()) * N * std::pow(gmax, N - 1) : 0.0;

  double diffusion = 0.0;
  if (scheme == Scheme::SemiImplicit) {
    diffusion = tv + nu_stiff;  // Delta eta and kappa^2 Delta u are implicit
  } else {
    diffusion = std::max(1.0, p.kappa * p.kappa + tv + nu_stiff);
  }
  // Reaction stiffness: g' + alpha'' f_eps for eta, Jacobian of varpi_delta for u.
  double reaction = 1.0 + 2.0 * f.c1() * std::sqrt(p.eps * p.eps + gmax * gmax);
  if (mode_of(scheme) == FlowMode::Penalized && p.delta > 0.0) {
    double umax2 = 0.0;
    for (std::size_t c = 0; c < U.grid().ncells(); ++c) umax2 = std::max(umax2, sq_norm(U.u.at(c)));
    reaction += std::max(2.0, 3.0 * umax2 - 1.0) / p.delta;
  }
  return 1.0 / (2.0 * N * diffusion / (h * h) + reaction);
}

// ---------------------------------------------------------------------------
// Steppers

StepResult step_explicit(const FieldPair& U, const Model& m, double dt, double cfl_safety) {
  if (dt < 0.0) throw std::invalid_argument("time step must be nonnegative");
  if (dt == 0.0) return {U, {}};
  const double limit = cfl_safety * dt_max(U, m, Scheme::Explicit);
  if (dt > limit) {
    throw CflViolation("explicit step dt = " + fmt(dt) + " exceeds the CFL limit " + fmt(limit));
  }
  const auto rhs = energy::flow_rhs(U, m, FlowMode::Penalized);
  FieldPair out = U;
  for (std::size_t i = 0; i < out.eta.data.size(); ++i) out.eta.data[i] += dt * rhs.d_eta.data[i];
  for (std::size_t i = 0; i < out.u.data.size(); ++i) out.u.data[i] += dt * rhs.d_u.data[i];
  if (!all_finite(out)) throw BlowUp("explicit step produced non-finite values");
  return {std::move(out), {}};
}

int solve_shifted_laplacian(double c, const Field& b, Field& x, double tol, int max_iter) {
  auto apply = [c](const Field& v) {
    Field out = grid::laplacian(v);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = v.data[i] - c * out.data[i];
    return out;
  };
  auto dot = [](const Field& a, const Field& bb) {
    return std::inner_product(a.data.begin(), a.data.end(), bb.data.begin(), 0.0);
  };
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.data.begin(), x.data.end(), 0.0);
    return 0;
  }
  Field r = apply(x);
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = b.data[i] - r.data[i];
  Field p = r;
  double rr = dot(r, r);
  const double target = tol * bnorm;
  int it = 0;
  while (std::sqrt(rr) > target) {
    if (it >= max_iter) {
      throw SolverStagnation("conjugate gradients did not reach relative residual " + fmt(tol) + " in " +
                                 std::to_string(max_iter) + " iterations",
                             std::sqrt(rr) / bnorm);
    }
    const Field Ap = apply(p);
    const double alpha = rr / dot(p, Ap);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      x.data[i] += alpha * p.data[i];
      r.data[i] -= alpha * Ap.data[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    rr = rr_new;
    ++it;
  }
  return it;
}

StepResult step_semi_implicit(const FieldPair& U, const Model& m, double dt, double cg_tol, int cg_max_iter) {
  if (!(dt > 0.0)) throw std::invalid_argument("semi-implicit step needs dt > 0");
  const auto& p = m.params;
  // Explicit parts: the full rhs minus the implicit linear diffusions.
  const auto rhs = energy::flow_rhs(U, m, FlowMode::Penalized);
  const Field lap_eta = grid::laplacian(U.eta);
  const Field lap_u = grid::laplacian(U.u);
  Field b_eta = U.eta;
  for (std::size_t i = 0; i < b_eta.data.size(); ++i) {
    b_eta.data[i] += dt * (rhs.d_eta.data[i] - lap_eta.data[i]);
  }
  Field b_u = U.u;
  const double k2 = p.kappa * p.kappa;
  for (std::size_t i = 0; i < b_u.data.size(); ++i) {
    b_u.data[i] += dt * (rhs.d_u.data[i] - k2 * lap_u.data[i]);
  }
  FieldPair out = U;
  StepInfo info;
  info.inner_iterations = solve_shifted_laplacian(dt, b_eta, out.eta, cg_tol, cg_max_iter);
  info.inner_iterations += solve_shifted_laplacian(dt * k2, b_u, out.u, cg_tol, cg_max_iter);
  if (!all_finite(out)) throw BlowUp("semi-implicit step produced non-finite values");
  return {std::move(out), info};
}

namespace {

// J(V) = F(V) + |V - U_prev|^2 / (2 dt); +inf outside the admissible range.
double proximal_objective(const FieldPair& V, const FieldPair& U_prev, const Model& m, double dt) {
  try {
    return energy::energy_total(V, m).total + sq_distance(V, U_prev) / (2.0 * dt);
  } catch (const model::ParamError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// L2 gradient of J, flattened as [eta..., u...].
std::vector<double> proximal_gradient(const FieldPair& V, const FieldPair& U_prev, const Model& m, double dt) {
  const auto rhs = energy::flow_rhs(V, m, FlowMode::Penalized);
  std::vector<double> g(V.eta.data.size() + V.u.data.size());
  const std::size_t ne = V.eta.data.size();
  for (std::size_t i = 0; i < ne; ++i) g[i] = -rhs.d_eta.data[i] + (V.eta.data[i] - U_prev.eta.data[i]) / dt;
  for (std::size_t i = 0; i < V.u.data.size(); ++i) {
    g[ne + i] = -rhs.d_u.data[i] + (V.u.data[i] - U_prev.u.data[i]) / dt;
  }
  return g;
}

FieldPair shifted(const FieldPair& V, const std::vector<double>& dir, double step) {
  FieldPair out = V;
  const std::size_t ne = V.eta.data.size();
  for (std::size_t i = 0; i < ne; ++i) out.eta.data[i] -= step * dir[i];
  for (std::size_t i = 0; i < V.u.data.size(); ++i) out.u.data[i] -= step * dir[ne + i];
  return out;
}

}  // namespace

StepResult step_minimizing_movement(const FieldPair& U_prev, const Model& m, double dt, double tol, int max_iter) {
  const auto& p = m.params;
  if (!(p.delta > 0.0)) throw model::ParamError("A5", "minimizing movement needs delta > 0");
  if (!(p.eps > 0.0)) throw model::ParamError("A4", "minimizing movement needs eps > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("minimizing-movement step needs dt > 0");
  const double r0 = model::r_zero(p, m.funcs);
  if (!(dt < 1.0 / r0)) {
    throw FlowError("minimizing-movement step dt = " + fmt(dt) + " must be below 1/R0 = " + fmt(1.0 / r0));
  }
  const double vol = U_prev.grid().cell_volume();
  const std::size_t ne = U_prev.eta.data.size();
  auto l2 = [vol](const std::vector<double>& v) {
    return std::sqrt(vol * std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };

  // Preconditioned Barzilai-Borwein descent. P = I/dt - diag(1, kappa^2) Lap
  // is the linear part of the Hessian of J (the split of the semi-implicit
  // scheme); the BB scaling absorbs the remaining f_eps stiffness.
  const double c_eta = 1.0;
  const double c_u = p.kappa * p.kappa;
  Field pe(U_prev.grid(), 1), pu(U_prev.grid(), U_prev.M());
  auto precondition = [&](const std::vector<double>& g) {
    Field be(U_prev.grid(), 1), bu(U_prev.grid(), U_prev.M());
    std::copy(g.begin(), g.begin() + ne, be.data.begin());
    std::copy(g.begin() + ne, g.end(), bu.data.begin());
    solve_shifted_laplacian(dt * c_eta, be, pe, 1e-8, 5000);
    solve_shifted_laplacian(dt * c_u, bu, pu, 1e-8, 5000);
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < ne; ++i) d[i] = dt * pe.data[i];
    for (std::size_t i = 0; i < pu.data.size(); ++i) d[ne + i] = dt * pu.data[i];
    return d;
  };
  // s . P s for a flattened increment.
  auto p_norm2 = [&](const std::vector<double>& v) {
    Field ve(U_prev.grid(), 1), vu(U_prev.grid(), U_prev.M());
    std::copy(v.begin(), v.begin() + ne, ve.data.begin());
    std::copy(v.begin() + ne, v.end(), vu.data.begin());
    const Field le = grid::laplacian(ve), lu = grid::laplacian(vu);
    double s = 0.0;
    for (std::size_t i = 0; i < ne; ++i) s += ve.data[i] * (ve.data[i] / dt - c_eta * le.data[i]);
    for (std::size_t i = 0; i < vu.data.size(); ++i) s += vu.data[i] * (vu.data[i] / dt - c_u * lu.data[i]);
    return s;
  };

  // Nonmonotone Armijo test against the max of recent objective values:
  // every accepted value is <= that max, which never exceeds J(U_prev).
  constexpr int kMemory = 10;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;

  FieldPair V = U_prev;
  double J = proximal_objective(V, U_prev, m, dt);
  const double J_base = J;
  std::vector<double> g = proximal_gradient(V, U_prev, m, dt);
  double gnorm = l2(g);
  std::deque<double> recent{J};
  double step = 1.0;
  int it = 0;
  for (; it < max_iter && gnorm > tol; ++it) {
    const std::vector<double> d = precondition(g);
    const double gd = std::inner_product(g.begin(), g.end(), d.begin(), 0.0);
    const double ref = *std::max_element(recent.begin(), recent.end());
    double trial_step = step;
    FieldPair trial = shifted(V, d, trial_step);
    double J_trial = proximal_objective(trial, U_prev, m, dt);
    int backtracks = 0;
    while (!(J_trial <= ref - kArmijo * trial_step * gd)) {
      if (++backtracks > kMaxBacktracks) break;
      trial_step *= 0.5;
      trial = shifted(V, d, trial_step);
      J_trial = proximal_objective(trial, U_prev, m, dt);
    }
    // Rounding floor: no representable decrease along d.
    if (backtracks > kMaxBacktracks && !(J_trial <= J_base)) break;
    std::vector<double> g_new = proximal_gradient(trial, U_prev, m, dt);
    // BB1 step in the P metric from s = -trial_step d, y = g_new - g.
    std::vector<double> sv(g.size());
    double sy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      sv[i] = -trial_step * d[i];
      sy += sv[i] * (g_new[i] - g[i]);
    }
    step = sy > 0.0 ? std::clamp(p_norm2(sv) / sy, 1e-10, 1e3) : 1.0;
    V = std::move(trial);
    J = J_trial;
    g = std::move(g_new);
    gnorm = l2(g);
    recent.push_back(J);
    if (static_cast<int>(recent.size()) > kMemory) recent.pop_front();
  }
  if (gnorm > tol) {
    throw SolverStagnation("minimizing-movement descent stalled at |grad J| = " + fmt(gnorm) + " > tol " +
                               fmt(tol) + " after " + std::to_string(it) + " iterations",
                           gnorm);
  }
  if (!all_finite(V)) throw BlowUp("minimizing-movement step produced non-finite values");
  StepInfo info;
  info.inner_iterations = it;
  info.inner_residual = gnorm;
  return {std::move(V), info};
}

namespace {

// Nudges the largest component by single ulps until the computed norm is
// exactly 1; the change is O(1e-16).
void snap_to_sphere(std::span<double> w) {
  std::size_t big = 0;
  for (std::size_t k = 1; k < w.size(); ++k) {
    if (std::abs(w[k]) > std::abs(w[big])) big = k;
  }
  for (int tries = 0; tries < 16; ++tries) {
    const double n = std::sqrt(sq_norm(w));
    if (n == 1.0) return;
    const double toward = (n > 1.0) == (w[big] > 0.0) ? 0.0 : 2.0 * w[big];
    w[big] = std::nextafter(w[big], toward);
  }
}

StepResult projected_impl(const FieldPair& U, const Model& m, double dt, double cfl_safety,
                          const energy::FlowRHS& rhs) {
  if (dt < 0.0) throw std::invalid_argument("time step must be nonnegative");
  if (dt == 0.0) return {U, {}};
  const double limit = cfl_safety * dt_max(U, m, Scheme::Projected);
  if (dt > limit) {
    throw CflViolation("projected step dt = " + fmt(dt) + " exceeds the CFL limit " + fmt(limit));
  }
  FieldPair out = U;
  for (std::size_t i = 0; i < out.eta.data.size(); ++i) out.eta.data[i] += dt * rhs.d_eta.data[i];
  StepInfo info;
  const int M = U.M();
  for (std::size_t c = 0; c < U.grid().ncells(); ++c) {
    const auto u = U.u.at(c);
    const auto d = rhs.d_u.at(c);
    auto w = out.u.at(c);
    double ud = 0.0;
    for (int k = 0; k < M; ++k) {
      ud += u[k] * d[k];
      w[k] = u[k] + dt * d[k];
    }
    const double n = std::sqrt(sq_norm(w));
    info.tangency_max = std::max(info.tangency_max, std::abs(ud));
    info.drift_max = std::max(info.drift_max, std::abs(n - 1.0));
    if (!(std::abs(n - 1.0) <= 0.5)) {
      throw BlowUp("projected step: pre-normalization drift " + fmt(n - 1.0) + " at cell " + std::to_string(c));
    }
    for (int k = 0; k < M; ++k) w[k] /= n;
    snap_to_sphere(w);
  }
  if (!all_finite(out)) throw BlowUp("projected step produced non-finite values");
  return {std::move(out), info};
}

double wedge_residual_impl(const FieldPair& U0, const FieldPair& U1, double dt, const energy::FlowRHS& rhs) {
  const int M = U0.M();
  std::vector<double> diff(static_cast<std::size_t>(M));
  double s = 0.0;
  for (std::size_t c = 0; c < U0.grid().ncells(); ++c) {
    const auto u0 = U0.u.at(c);
    const auto u1 = U1.u.at(c);
    const auto d = rhs.d_u.at(c);
    const double mu = rhs.mu.data[c];
    // d_t u ^ u - div Z ^ u = (d_t u - div Z) ^ u, with div Z = d_u - mu u.
    for (int k = 0; k < M; ++k) diff[k] = (u1[k] - u0[k]) / dt - (d[k] - mu * u0[k]);
    const double n = exterior::norm(exterior::wedge(exterior::MultiVector::vector(diff),
                                                    exterior::MultiVector::vector(u0)));
    s += n * n;
  }
  return std::sqrt(s * U0.grid().cell_volume());
}

}  // namespace

StepResult step_projected(const FieldPair& U, const Model& m, double dt, double cfl_safety) {
  if (dt == 0.0) return {U, {}};
  return projected_impl(U, m, dt, cfl_safety, energy::flow_rhs(U, m, FlowMode::Constrained));
}

// ---------------------------------------------------------------------------
// Records and trajectories

std::string StepRecord::csv_header() {
  return "step,time," + energy::EnergyBreakdown::csv_header() +
         ",diss_increment,eta_min,eta_max,u_norm_max,sphere_residual,gl_residual,cap_min,mu_L1,alphaB_max,"
         "wedge_residual,drift_max,tangency_max,inner_iterations";
}

std::string StepRecord::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << step << ',' << time << ',' << energy.csv_row() << ',' << diss_increment << ',' << eta_min << ',' << eta_max
     << ',' << u_norm_max << ',' << sphere_residual << ',' << gl_residual << ',' << cap_min << ',' << mu_L1 << ','
     << alphaB_max << ',' << wedge_residual << ',' << drift_max << ',' << tangency_max << ',' << inner_iterations;
  return os.str();
}

StepRecord StepRecord::from_csv(const std::string& row) {
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string item; std::getline(ss, item, ',');) cols.push_back(item);
  constexpr std::size_t kCols = 2 + 7 + 13;
  if (cols.size() != kCols) {
    throw std::invalid_argument("record row has " + std::to_string(cols.size()) + " columns, expected " +
                                std::to_string(kCols));
  }
  StepRecord r;
  r.step = std::stoi(cols[0]);
  r.time = std::stod(cols[1]);
  std::string e = cols[2];
  for (int i = 3; i < 9; ++i) e += "," + cols[i];
  r.energy = energy::EnergyBreakdown::from_csv(e);
  double* rest[] = {&r.diss_increment, &r.eta_min,     &r.eta_max,        &r.u_norm_max,  &r.sphere_residual,
                    &r.gl_residual,    &r.cap_min,     &r.mu_L1,          &r.alphaB_max,  &r.wedge_residual,
                    &r.drift_max,      &r.tangency_max};
  for (int i = 0; i < 12; ++i) *rest[i] = std::stod(cols[9 + i]);
  r.inner_iterations = std::stoi(cols[21]);
  return r;
}

namespace {

StepRecord summarize_impl(const FieldPair& U, const Model& m, FlowMode mode, const energy::FlowRHS* rhs) {
  const auto& p = m.params;
  const auto& f = m.funcs;
  StepRecord r;
  r.energy = energy::energy_total(U, m);
  const grid::Grid& g = U.grid();
  const double vol = g.cell_volume();
  r.eta_min = *std::min_element(U.eta.data.begin(), U.eta.data.end());
  r.eta_max = *std::max_element(U.eta.data.begin(), U.eta.data.end());
  r.cap_min = std::numeric_limits<double>::infinity();
  double gl2 = 0.0;
  for (std::size_t c = 0; c < g.ncells(); ++c) {
    const auto u = U.u.at(c);
    const double n2 = sq_norm(u);
    const double n = std::sqrt(n2);
    r.u_norm_max = std::max(r.u_norm_max, n);
    r.sphere_residual = std::max(r.sphere_residual, std::abs(n - 1.0));
    gl2 += (n2 - 1.0) * (n2 - 1.0);
    r.cap_min = std::min(r.cap_min, n > 0.0 ? u[0] / n : 0.0);
  }
  r.gl_residual = std::sqrt(gl2 * vol);

  const GradField gu = grid::grad(U.u);
  std::vector<double> B(gu.block());
  for (std::size_t c = 0; c < g.ncells(); ++c) {
    const auto G = gu.at(c);
    if (p.eps > 0.0) {
      model::grad_f_eps(G, p.eps, B);
    } else if (std::sqrt(sq_norm(G)) >= 1e-14) {
      model::sgn_selection(G, B);
    } else {
      std::fill(B.begin(), B.end(), 0.0);
    }
    r.alphaB_max = std::max(r.alphaB_max, f.alpha(U.eta.data[c]) * std::sqrt(sq_norm(B)));
  }

  if (mode == FlowMode::Constrained) {
    for (double mu : rhs->mu.data) r.mu_L1 += std::abs(mu);
    r.mu_L1 *= vol;
  } else if (p.delta > 0.0) {
    // Penalized multiplier (1 - |u|^2) / delta: varpi_delta = -mu u.
    for (std::size_t c = 0; c < g.ncells(); ++c) r.mu_L1 += std::abs(1.0 - sq_norm(U.u.at(c))) / p.delta;
    r.mu_L1 *= vol;
  }
  return r;
}

}  // namespace

StepRecord summarize(const FieldPair& U, const Model& m, FlowMode mode) {
  if (mode == FlowMode::Constrained) {
    const auto rhs = energy::flow_rhs(U, m, FlowMode::Constrained);
    return summarize_impl(U, m, mode, &rhs);
  }
  return summarize_impl(U, m, mode, nullptr);
}

double wedge_residual(const FieldPair& U0, const FieldPair& U1, double dt, const Model& m) {
  if (!(dt > 0.0)) throw std::invalid_argument("wedge residual needs dt > 0");
  return wedge_residual_impl(U0, U1, dt, energy::flow_rhs(U0, m, FlowMode::Constrained));
}

Trajectory evolve(const FieldPair& U0, const Model& m, const StepperConfig& cfg, double T,
                  const EvolveOptions& opts) {
  if (!(T >= 0.0)) throw std::invalid_argument("final time must be nonnegative");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (opts.record_stride < 1) throw std::invalid_argument("record stride must be >= 1");
  Trajectory traj;
  traj.mode = mode_of(cfg.scheme);
  const int n = T == 0.0 ? 0 : static_cast<int>(std::ceil(T / cfg.dt - 1e-9));
  const double dt = n == 0 ? cfg.dt : T / n;
  traj.dt = dt;

  // Constrained runs reuse one flow_rhs per state for the step, the
  // multiplier summary and the wedge residual.
  const bool constrained = traj.mode == FlowMode::Constrained;
  std::optional<energy::FlowRHS> rhs;
  if (constrained) rhs = energy::flow_rhs(U0, m, FlowMode::Constrained);
  StepRecord first = summarize_impl(U0, m, traj.mode, rhs ? &*rhs : nullptr);
  const double mm_tol = cfg.mm_tol > 0.0 ? cfg.mm_tol : 1e-8 * (1.0 + first.energy.total);
  traj.records.push_back(first);
  if (opts.on_record) opts.on_record(first, U0);
  auto want_checkpoint = [&](int k) {
    return std::find(opts.checkpoint_steps.begin(), opts.checkpoint_steps.end(), k) != opts.checkpoint_steps.end();
  };
  if (want_checkpoint(0)) traj.checkpoints.push_back(U0);

  FieldPair U = U0;
  double diss = 0.0;
  StepInfo agg;
  for (int k = 1; k <= n; ++k) {
    StepResult res{U, {}};
    std::optional<energy::FlowRHS> next_rhs;
    try {
      switch (cfg.scheme) {
        case Scheme::Explicit: res = step_explicit(U, m, dt, cfg.cfl_safety); break;
        case Scheme::SemiImplicit: res = step_semi_implicit(U, m, dt, cfg.cg_tol, cfg.cg_max_iter); break;
        case Scheme::MinimizingMovement:
          res = step_minimizing_movement(U, m, dt, mm_tol, cfg.mm_max_iter);
          break;
        case Scheme::Projected:
          res = projected_impl(U, m, dt, cfg.cfl_safety, *rhs);
          next_rhs = energy::flow_rhs(res.U, m, FlowMode::Constrained);
          break;
      }
      if (!all_finite(res.U)) throw BlowUp("non-finite state");
    } catch (const std::exception& e) {
      traj.final_state = U;
      throw FlowError("step " + std::to_string(k) + " (t = " + fmt(k * dt) + "): " + e.what());
    }
    diss += sq_distance(res.U, U) / dt;
    agg.inner_iterations += res.info.inner_iterations;
    agg.drift_max = std::max(agg.drift_max, res.info.drift_max);
    agg.tangency_max = std::max(agg.tangency_max, res.info.tangency_max);
    if (k % opts.record_stride == 0 || k == n) {
      StepRecord r = summarize_impl(res.U, m, traj.mode, next_rhs ? &*next_rhs : nullptr);
      r.step = k;
      r.time = k * dt;
      r.diss_increment = diss;
      r.drift_max = agg.drift_max;
      r.tangency_max = agg.tangency_max;
      r.inner_iterations = agg.inner_iterations;
      if (constrained) r.wedge_residual = wedge_residual_impl(U, res.U, dt, *rhs);
      traj.records.push_back(r);
      if (opts.on_record) opts.on_record(r, res.U);
      diss = 0.0;
      agg = {};
    }
    U = std::move(res.U);
    rhs = std::move(next_rhs);
    if (want_checkpoint(k)) traj.checkpoints.push_back(U);
  }
  traj.final_state = std::move(U);
  return traj;
}

// ---------------------------------------------------------------------------
// Continuation

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 paired points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double grad_u_L1(const FieldPair& U) {
  const GradField gu = grid::grad(U.u);
  double s = 0.0;
  for (std::size_t c = 0; c < U.grid().ncells(); ++c) s += std::sqrt(sq_norm(gu.at(c)));
  return s * U.grid().cell_volume();
}

namespace {

struct Stage {
  std::string name;
  std::vector<double> values;
  Scheme scheme;
};

Model level_model(const Model& base, const ContinuationSchedule& sch, const std::string& stage, double value) {
  Model m = base;
  if (stage == "delta") {
    m.params.delta = value;
  } else if (stage == "nu") {
    m.params.delta = 0.0;
    m.params.nu = value;
  } else {
    m.params.delta = 0.0;
    if (!sch.nus.empty()) m.params.nu = sch.nus.back();
    m.params.eps = value;
  }
  return m;
}

}  // namespace

ContinuationReport continuation(const FieldPair& U0, const Model& base, const ContinuationConfig& cfg,
                                const std::function<void(const LevelResult&)>& on_level) {
  if (cfg.checkpoints < 1) throw std::invalid_argument("continuation needs >= 1 checkpoint");
  if (!(cfg.T > 0.0)) throw std::invalid_argument("continuation horizon must be positive");
  const auto& sch = cfg.schedule;
  const std::vector<Stage> stages{{"delta", sch.deltas, cfg.penalized_scheme},
                                  {"nu", sch.nus, Scheme::Projected},
                                  {"eps", sch.epss, Scheme::Projected}};
  ContinuationReport report;
  for (const auto& stage : stages) {
    if (stage.values.empty()) continue;
    for (std::size_t i = 1; i < stage.values.size(); ++i) {
      if (!(stage.values[i] < stage.values[i - 1])) {
        throw std::invalid_argument(stage.name + " schedule must be strictly decreasing");
      }
    }
    // One step size per stage so levels differ only in the swept parameter.
    double dt = cfg.stepper.dt;
    if (dt <= 0.0) {
      dt = std::numeric_limits<double>::infinity();
      for (double v : stage.values) {
        const Model m = level_model(base, sch, stage.name, v);
        if (stage.scheme == Scheme::MinimizingMovement) {
          dt = std::min(dt, 0.5 / model::r_zero(m.params, m.funcs));
        } else {
          try {
            dt = std::min(dt, cfg.stepper.cfl_safety * dt_max(U0, m, stage.scheme));
          } catch (const std::exception&) {
            // invalid level; reported when it runs
          }
        }
      }
    }
    const int n = cfg.checkpoints * static_cast<int>(std::ceil(cfg.T / (dt * cfg.checkpoints) - 1e-9));
    const double dt_run = cfg.T / n;
    StepperConfig sc = cfg.stepper;
    sc.scheme = stage.scheme;
    sc.dt = dt_run;
    EvolveOptions opts;
    opts.record_stride = 1;
    for (int k = 1; k <= cfg.checkpoints; ++k) opts.checkpoint_steps.push_back(k * n / cfg.checkpoints);

    const LevelResult* prev = nullptr;
    std::size_t prev_index = 0;
    for (double v : stage.values) {
      LevelResult lr;
      lr.stage = stage.name;
      lr.value = v;
      lr.dt = dt_run;
      const Model m = level_model(base, sch, stage.name, v);
      try {
        m.params.validate(stage.scheme == Scheme::Projected);
        lr.trajectory = evolve(U0, m, sc, cfg.T, opts);
        const auto& recs = lr.trajectory.records;
        lr.F0 = recs.front().energy.total;
        for (const auto& r : recs) lr.gl_residual = std::max(lr.gl_residual, r.gl_residual);
        lr.gl_bound = stage.name == "delta" ? std::sqrt(v) * lr.F0 : 0.0;
        lr.final_energy = recs.back().energy.total;
        lr.nu_term = recs.back().energy.nu_term;
        lr.weighted_tv = recs.back().energy.weighted_tv;
        lr.grad_u_L1 = grad_u_L1(*lr.trajectory.final_state);
        if (prev) {
          double d = 0.0;
          for (std::size_t j = 0; j < lr.trajectory.checkpoints.size(); ++j) {
            d = std::max(d, grid::distance(lr.trajectory.checkpoints[j], prev->trajectory.checkpoints[j]));
          }
          lr.distance_prev = d;
        }
        lr.ok = true;
      } catch (const std::exception& e) {
        lr.ok = false;
        lr.error = e.what();
      }
      report.levels.push_back(std::move(lr));
      if (report.levels.back().ok) {
        prev_index = report.levels.size() - 1;
        prev = &report.levels[prev_index];
      }
      if (on_level) on_level(report.levels.back());
      // push_back may have moved the vector
      if (prev) prev = &report.levels[prev_index];
    }
  }
  std::vector<double> ds, rs;
  for (const auto& l : report.levels) {
    if (l.stage == "delta" && l.ok && l.gl_residual > 0.0) {
      ds.push_back(l.value);
      rs.push_back(l.gl_residual);
    }
  }
  if (ds.size() >= 2) report.delta_slope = loglog_slope(ds, rs);
  return report;
}

}  // namespace kwc::flow
