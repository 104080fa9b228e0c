#include "kwc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kwc::diagnostics {

using flow::Trajectory;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_records(const Trajectory& traj) {
  if (traj.records.empty()) throw std::invalid_argument("trajectory has no records");
}

}  // namespace

std::vector<Violation> check_energy_inequality(const Trajectory& traj, double tol, double theta) {
  require_records(traj);
  std::vector<Violation> out;
  const double F0 = traj.records.front().energy.total;
  double diss = 0.0;
  for (std::size_t i = 1; i < traj.records.size(); ++i) {
    const auto& r = traj.records[i];
    diss += r.diss_increment;
    const double excess = r.energy.total + theta * diss - F0 - tol;
    if (excess > 0.0) out.push_back({r.step, excess});
  }
  return out;
}

double dissipation_total(const Trajectory& traj) {
  double s = 0.0;
  for (const auto& r : traj.records) s += r.diss_increment;
  return s;
}

double check_eta_bounds(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& r : traj.records) worst = std::max({worst, -r.eta_min, r.eta_max - 1.0});
  return worst;
}

GlCheck check_gl_residual(const Trajectory& traj, double delta, double F0) {
  if (!(delta > 0.0)) throw std::invalid_argument("GL residual check needs delta > 0");
  GlCheck c;
  for (const auto& r : traj.records) c.max_residual = std::max(c.max_residual, r.gl_residual);
  c.bound = std::sqrt(delta) * F0;
  c.energy_bound = 2.0 * std::sqrt(delta * F0);
  c.pass = c.max_residual <= c.bound * (1.0 + kGlSlack);
  return c;
}

double check_cap(const Trajectory& traj) {
  double m = kInf;
  for (const auto& r : traj.records) m = std::min(m, r.cap_min);
  return m;
}

double check_wedge_form(const grid::FieldPair& U0, const grid::FieldPair& U1, double dt, const energy::Model& m) {
  return flow::wedge_residual(U0, U1, dt, m);
}

bool DiagnosticsReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string DiagnosticsReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "name,value,bound,pass\n";
  for (const auto& c : checks) os << c.name << ',' << c.value << ',' << c.bound << ',' << (c.pass ? 1 : 0) << '\n';
  return os.str();
}

DiagnosticsReport DiagnosticsReport::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "name,value,bound,pass") {
    throw std::invalid_argument("report csv: missing header");
  }
  DiagnosticsReport rep;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) cols.push_back(item);
    if (cols.size() != 4 || (cols[3] != "0" && cols[3] != "1")) {
      throw std::invalid_argument("report csv line " + std::to_string(lineno) + ": malformed row");
    }
    Check c{cols[0], std::stod(cols[1]), std::stod(cols[2]), cols[3] == "1"};
    if (c.name == "gl_residual") rep.gl_residual_max = c.value;
    if (c.name == "sphere_residual") rep.sphere_residual_max = c.value;
    if (c.name == "cap_min_u1") rep.cap_min_u1 = c.value;
    if (c.name == "wedge_residual") rep.wedge_residual_max = c.value;
    if (c.name == "mu_L1") rep.mu_L1_norm = c.value;
    if (c.name == "dissipation") rep.dissipation_total = c.value;
    rep.checks.push_back(std::move(c));
  }
  return rep;
}

DiagnosticsReport report(const Trajectory& traj, const energy::Model& m, const Thresholds& th) {
  require_records(traj);
  const auto& recs = traj.records;
  const auto& p = m.params;
  const double F0 = recs.front().energy.total;
  const double FT = recs.back().energy.total;
  const int nsteps = recs.back().step;
  const bool constrained = traj.mode == energy::FlowMode::Constrained;
  DiagnosticsReport rep;

  const double tol = th.energy_tol >= 0.0 ? th.energy_tol : nsteps * 1e-8 * (1.0 + F0);
  const double theta = th.dissipation_weight;
  rep.energy_violations = check_energy_inequality(traj, tol, theta);
  double worst = -kInf, diss = 0.0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    diss += recs[i].diss_increment;
    worst = std::max(worst, recs[i].energy.total + theta * diss - F0);
  }
  if (recs.size() == 1) worst = 0.0;
  rep.checks.push_back({"energy_inequality", worst, tol, rep.energy_violations.empty()});

  rep.dissipation_total = dissipation_total(traj);
  const double dbound = (F0 - FT + tol) / theta;
  rep.checks.push_back({"dissipation", rep.dissipation_total, dbound, rep.dissipation_total <= dbound});

  const double eta_exc = check_eta_bounds(traj);
  rep.checks.push_back({"eta_bounds", eta_exc, th.eta_tol, eta_exc <= th.eta_tol});

  if (!constrained && p.delta > 0.0) {
    const GlCheck gl = check_gl_residual(traj, p.delta, F0);
    rep.gl_residual_max = gl.max_residual;
    rep.checks.push_back({"gl_residual", gl.max_residual, gl.bound * (1.0 + kGlSlack), gl.pass});
    rep.checks.push_back(
        {"gl_residual_energy", gl.max_residual, gl.energy_bound, gl.max_residual <= gl.energy_bound});
    // |u| <= 1 is preserved when it holds initially.
    double umax = 0.0;
    for (const auto& r : recs) umax = std::max(umax, r.u_norm_max);
    const double ubound = std::max(1.0, recs.front().u_norm_max) + 1e-8;
    rep.checks.push_back({"u_norm_max", umax, ubound, umax <= ubound});
  }

  if (constrained) {
    for (std::size_t i = 1; i < recs.size(); ++i) {
      rep.sphere_residual_max = std::max(rep.sphere_residual_max, recs[i].sphere_residual);
    }
    rep.checks.push_back(
        {"sphere_residual", rep.sphere_residual_max, th.sphere_tol, rep.sphere_residual_max <= th.sphere_tol});
    double tang = 0.0;
    for (const auto& r : recs) tang = std::max(tang, r.tangency_max);
    rep.checks.push_back({"tangency", tang, th.tangency_tol, tang <= th.tangency_tol});
    for (const auto& r : recs) rep.wedge_residual_max = std::max(rep.wedge_residual_max, r.wedge_residual);
    rep.checks.push_back({"wedge_residual", rep.wedge_residual_max, kInf, true});
  }

  rep.cap_min_u1 = check_cap(traj);
  if (th.cap_r >= 0.0) {
    rep.checks.push_back({"cap_min_u1", rep.cap_min_u1, th.cap_r - th.cap_tol, rep.cap_min_u1 >= th.cap_r - th.cap_tol});
  }

  // L1(0,T; L1) norm of the multiplier, left-point rule over the records.
  for (std::size_t i = 1; i < recs.size(); ++i) rep.mu_L1_norm += recs[i - 1].mu_L1 * (recs[i].time - recs[i - 1].time);
  rep.checks.push_back({"mu_L1", rep.mu_L1_norm, kInf, std::isfinite(rep.mu_L1_norm)});

  double ab = 0.0, emin = 0.0, emax = 1.0;
  for (const auto& r : recs) {
    ab = std::max(ab, r.alphaB_max);
    emin = std::min(emin, r.eta_min);
    emax = std::max(emax, r.eta_max);
  }
  const double abound = std::max({m.funcs.alpha_max(), m.funcs.alpha(emin), m.funcs.alpha(emax)}) * (1.0 + 1e-12);
  rep.checks.push_back({"alphaB_max", ab, abound, ab <= abound});
  return rep;
}

}  // namespace kwc::diagnostics
