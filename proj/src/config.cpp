#include "kwc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kwc::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",
      "grid.dims",
      "grid.h",
      "model.M",
      "model.kappa",
      "model.eps",
      "model.nu",
      "model.delta",
      "model.T",
      "model.alpha",
      "model.c0",
      "model.c1",
      "initial.kind",
      "initial.eta_value",
      "initial.grain_a_angle",
      "initial.grain_a_axis",
      "initial.grain_b_angle",
      "initial.grain_b_axis",
      "initial.interface_width",
      "initial.eta_min",
      "initial.cap_r",
      "initial.sigma",
      "initial.smoothing_sweeps",
      "stepper.scheme",
      "stepper.dt",
      "stepper.cfl_safety",
      "stepper.cg_tol",
      "stepper.cg_max_iter",
      "stepper.mm_tol",
      "stepper.mm_max_iter",
      "output.dir",
      "output.record_stride",
      "output.snapshot_stride",
      "continuation.deltas",
      "continuation.nus",
      "continuation.epss",
      "continuation.penalized_scheme",
      "continuation.checkpoints",
      "diagnostics.cap_r",
      "diagnostics.energy_tol",
  };
  return keys;
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(x)) {
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  }
  return x;
}

template <class Int>
Int to_int(const std::string& key, const std::string& text) {
  Int x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return x;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(trim(item));
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(key, item));
  return out;
}

class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}
  bool has(const std::string& key) const { return raw_.count(key) > 0; }
  const std::string& str(const std::string& key) const { return raw_.at(key).value; }
  template <class T, class Fn>
  void get(const std::string& key, T& out, Fn&& convert) const {
    if (has(key)) out = convert(key, str(key));
  }
  void number(const std::string& key, double& out) const { get(key, out, to_double); }
  void integer(const std::string& key, int& out) const { get(key, out, to_int<int>); }
  void list(const std::string& key, std::vector<double>& out) const { get(key, out, to_list); }

 private:
  const RawConfig& raw_;
};

void require_strictly_decreasing(const std::string& key, const std::vector<double>& v, double lower,
                                 bool lower_inclusive) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool ok = lower_inclusive ? v[i] >= lower : v[i] > lower;
    if (!ok) throw ConfigError(key, "value " + fmt(v[i]) + " out of range");
    if (i > 0 && !(v[i] < v[i - 1])) throw ConfigError(key, "schedule must be strictly decreasing");
  }
}

}  // namespace

RawConfig parse(const std::string& text) {
  RawConfig out;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty() || section.find_first_of(" \t=.") != std::string::npos) {
        throw ConfigError(where, "invalid section name '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (name.empty() || name.find_first_of(" \t") != std::string::npos) {
      throw ConfigError(where, "invalid key '" + name + "'");
    }
    const std::string key = section.empty() ? name : section + "." + name;
    if (!known_keys().count(key)) throw ConfigError(where, "unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where, "empty value for '" + key + "'");
    if (out.count(key)) {
      throw ConfigError(where, "duplicate key '" + key + "' (first set on line " + std::to_string(out[key].line) + ")");
    }
    out[key] = {value, lineno};
  }
  return out;
}

RawConfig parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

const std::vector<std::string>& required_keys(Purpose purpose) {
  static const std::vector<std::string> run{"seed",           "grid.dims",  "grid.h",    "initial.kind",
                                            "stepper.scheme", "stepper.dt", "output.dir"};
  static const std::vector<std::string> cont{"seed", "grid.dims", "grid.h", "initial.kind", "output.dir"};
  return purpose == Purpose::Run ? run : cont;
}

grid::Grid RunConfig::grid() const { return grid::Grid::uniform(dims, h); }

RunConfig resolve(const RawConfig& raw, Purpose purpose) {
  for (const auto& key : required_keys(purpose)) {
    if (!raw.count(key)) throw ConfigError(key, "missing required key");
  }
  const Reader r(raw);
  RunConfig c;
  c.seed = to_int<std::uint64_t>("seed", r.str("seed"));

  // grid
  for (const auto& item : split(r.str("grid.dims"), 'x')) c.dims.push_back(to_int<int>("grid.dims", item));
  if (c.dims.empty() || c.dims.size() > 3) throw ConfigError("grid.dims", "need 1 to 3 axes, e.g. 64x64");
  for (int d : c.dims) {
    if (d < 2) throw ConfigError("grid.dims", "each axis needs at least 2 cells");
  }
  c.h = to_double("grid.h", r.str("grid.h"));
  if (!(c.h > 0.0)) throw ConfigError("grid.h", "spacing must be positive");

  // model
  auto& p = c.model.params;
  p.dimN = static_cast<int>(c.dims.size());
  r.integer("model.M", p.M);
  r.number("model.kappa", p.kappa);
  r.number("model.eps", p.eps);
  r.number("model.nu", p.nu);
  r.number("model.delta", p.delta);
  r.number("model.T", p.T);
  model::AlphaVariant variant = model::AlphaVariant::Quadratic;
  double c0 = 0.1, c1 = 1.0;
  if (r.has("model.alpha")) {
    try {
      variant = model::parse_variant(r.str("model.alpha"));
    } catch (const std::exception& e) {
      throw ConfigError("model.alpha", e.what());
    }
  }
  r.number("model.c0", c0);
  r.number("model.c1", c1);
  try {
    c.model.funcs = model::ModelFunctions(variant, c0, c1);
  } catch (const std::exception& e) {
    throw ConfigError("model.c0", e.what());
  }
  auto check_param = [&](const std::string& key, bool ok, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  check_param("model.kappa", p.kappa > 0.0, "must be positive");
  check_param("model.eps", p.eps >= 0.0, "must be nonnegative");
  check_param("model.nu", p.nu >= 0.0, "must be nonnegative");
  check_param("model.delta", p.delta >= 0.0, "must be nonnegative");
  check_param("model.M", p.M >= 2 && p.M <= 8, "must lie in 2..8");
  check_param("model.T", p.T > 0.0, "must be positive");

  // initial data
  auto& in = c.initial;
  in.seed = c.seed;
  in.kind = r.str("initial.kind");
  r.number("initial.eta_value", in.eta_value);
  r.number("initial.grain_a_angle", in.grain_a_angle);
  r.list("initial.grain_a_axis", in.grain_a_axis);
  r.number("initial.grain_b_angle", in.grain_b_angle);
  r.list("initial.grain_b_axis", in.grain_b_axis);
  r.number("initial.interface_width", in.interface_width);
  r.number("initial.eta_min", in.eta_min);
  r.number("initial.cap_r", in.cap_r);
  r.number("initial.sigma", in.sigma);
  r.integer("initial.smoothing_sweeps", in.smoothing_sweeps);
  try {
    (void)grid::make_initial(in, c.grid(), p.M);
  } catch (const std::exception& e) {
    throw ConfigError("initial.kind", std::string(in.kind) + ": " + e.what());
  }

  // stepper
  auto& st = c.stepper;
  if (r.has("stepper.scheme")) {
    try {
      st.scheme = flow::parse_scheme(r.str("stepper.scheme"));
    } catch (const std::exception& e) {
      throw ConfigError("stepper.scheme", e.what());
    }
  }
  if (!r.has("stepper.dt") || r.str("stepper.dt") == "auto") {
    c.dt_auto = true;
  } else {
    st.dt = to_double("stepper.dt", r.str("stepper.dt"));
    check_param("stepper.dt", st.dt > 0.0, "must be positive or 'auto'");
  }
  r.number("stepper.cfl_safety", st.cfl_safety);
  r.number("stepper.cg_tol", st.cg_tol);
  r.integer("stepper.cg_max_iter", st.cg_max_iter);
  r.number("stepper.mm_tol", st.mm_tol);
  r.integer("stepper.mm_max_iter", st.mm_max_iter);
  check_param("stepper.cfl_safety", st.cfl_safety > 0.0 && st.cfl_safety <= 1.0, "must lie in (0, 1]");
  check_param("stepper.cg_tol", st.cg_tol > 0.0, "must be positive");
  check_param("stepper.cg_max_iter", st.cg_max_iter >= 1, "must be >= 1");
  check_param("stepper.mm_tol", st.mm_tol >= 0.0, "must be nonnegative (0 = automatic)");
  check_param("stepper.mm_max_iter", st.mm_max_iter >= 1, "must be >= 1");

  if (purpose == Purpose::Run) {
    const bool constrained = flow::mode_of(st.scheme) == energy::FlowMode::Constrained;
    if (constrained) {
      check_param("model.delta", p.delta == 0.0, "projected-constrained runs need delta = 0");
    } else {
      check_param("model.delta", p.delta > 0.0, "penalized schemes need delta > 0");
      check_param("model.eps", p.eps > 0.0, "penalized schemes need eps > 0");
    }
    if (st.scheme == flow::Scheme::MinimizingMovement && !c.dt_auto) {
      const double r0 = model::r_zero(p, c.model.funcs);
      check_param("stepper.dt", st.dt < 1.0 / r0, "minimizing movement needs dt < 1/R0 = " + fmt(1.0 / r0));
    }
  }

  // output
  c.out_dir = r.str("output.dir");
  r.integer("output.record_stride", c.record_stride);
  r.integer("output.snapshot_stride", c.snapshot_stride);
  check_param("output.record_stride", c.record_stride >= 1, "must be >= 1");
  check_param("output.snapshot_stride", c.snapshot_stride >= 0, "must be >= 0");

  // continuation
  r.list("continuation.deltas", c.schedule.deltas);
  r.list("continuation.nus", c.schedule.nus);
  r.list("continuation.epss", c.schedule.epss);
  require_strictly_decreasing("continuation.deltas", c.schedule.deltas, 0.0, false);
  require_strictly_decreasing("continuation.nus", c.schedule.nus, 0.0, true);
  require_strictly_decreasing("continuation.epss", c.schedule.epss, 0.0, true);
  if (r.has("continuation.penalized_scheme")) {
    try {
      c.penalized_scheme = flow::parse_scheme(r.str("continuation.penalized_scheme"));
    } catch (const std::exception& e) {
      throw ConfigError("continuation.penalized_scheme", e.what());
    }
    check_param("continuation.penalized_scheme", flow::mode_of(c.penalized_scheme) == energy::FlowMode::Penalized,
                "must be a penalized scheme");
  }
  r.integer("continuation.checkpoints", c.checkpoints);
  check_param("continuation.checkpoints", c.checkpoints >= 1, "must be >= 1");
  if (purpose == Purpose::Continuation) {
    if (c.schedule.deltas.empty() && c.schedule.nus.empty() && c.schedule.epss.empty()) {
      throw ConfigError("continuation.deltas", "missing required key (at least one schedule list)");
    }
  }

  // diagnostics
  r.number("diagnostics.cap_r", c.cap_r);
  if (r.has("diagnostics.cap_r")) check_param("diagnostics.cap_r", c.cap_r > 0.0 && c.cap_r < 1.0, "must lie in (0, 1)");
  r.number("diagnostics.energy_tol", c.energy_tol);
  return c;
}

std::string RunConfig::to_text() const {
  const auto& p = model.params;
  std::ostringstream os;
  os << "seed = " << seed << "\n\n[grid]\ndims = ";
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << "\nh = " << fmt(h) << "\n\n[model]\n"
     << "M = " << p.M << "\nkappa = " << fmt(p.kappa) << "\neps = " << fmt(p.eps) << "\nnu = " << fmt(p.nu)
     << "\ndelta = " << fmt(p.delta) << "\nT = " << fmt(p.T) << "\nalpha = " << model::to_string(model.funcs.variant())
     << "\nc0 = " << fmt(model.funcs.c0()) << "\nc1 = " << fmt(model.funcs.c1()) << "\n\n[initial]\n"
     << "kind = " << initial.kind << "\neta_value = " << fmt(initial.eta_value)
     << "\ngrain_a_angle = " << fmt(initial.grain_a_angle);
  if (!initial.grain_a_axis.empty()) os << "\ngrain_a_axis = " << fmt_list(initial.grain_a_axis);
  os << "\ngrain_b_angle = " << fmt(initial.grain_b_angle);
  if (!initial.grain_b_axis.empty()) os << "\ngrain_b_axis = " << fmt_list(initial.grain_b_axis);
  os << "\ninterface_width = " << fmt(initial.interface_width) << "\neta_min = " << fmt(initial.eta_min)
     << "\ncap_r = " << fmt(initial.cap_r) << "\nsigma = " << fmt(initial.sigma)
     << "\nsmoothing_sweeps = " << initial.smoothing_sweeps << "\n\n[stepper]\n"
     << "scheme = " << flow::to_string(stepper.scheme) << "\ndt = " << (dt_auto ? "auto" : fmt(stepper.dt))
     << "\ncfl_safety = " << fmt(stepper.cfl_safety) << "\ncg_tol = " << fmt(stepper.cg_tol)
     << "\ncg_max_iter = " << stepper.cg_max_iter << "\nmm_tol = " << fmt(stepper.mm_tol)
     << "\nmm_max_iter = " << stepper.mm_max_iter << "\n\n[output]\n"
     << "dir = " << out_dir.string() << "\nrecord_stride = " << record_stride
     << "\nsnapshot_stride = " << snapshot_stride << "\n\n[continuation]\n";
  if (!schedule.deltas.empty()) os << "deltas = " << fmt_list(schedule.deltas) << "\n";
  if (!schedule.nus.empty()) os << "nus = " << fmt_list(schedule.nus) << "\n";
  if (!schedule.epss.empty()) os << "epss = " << fmt_list(schedule.epss) << "\n";
  os << "penalized_scheme = " << flow::to_string(penalized_scheme) << "\ncheckpoints = " << checkpoints
     << "\n\n[diagnostics]\n";
  if (cap_r >= 0.0) os << "cap_r = " << fmt(cap_r) << "\n";
  os << "energy_tol = " << fmt(energy_tol) << "\n";
  return os.str();
}

double resolved_dt(const RunConfig& cfg, const grid::FieldPair& U0) {
  const auto& st = cfg.stepper;
  if (st.scheme == flow::Scheme::MinimizingMovement) {
    return cfg.dt_auto ? 0.5 / model::r_zero(cfg.model.params, cfg.model.funcs) : st.dt;
  }
  const double limit = st.cfl_safety * flow::dt_max(U0, cfg.model, st.scheme);
  if (cfg.dt_auto) return limit;
  const bool cfl_bound = st.scheme == flow::Scheme::Explicit || st.scheme == flow::Scheme::Projected;
  if (cfl_bound && st.dt > limit) {
    throw ConfigError("stepper.dt", "dt = " + fmt(st.dt) + " exceeds cfl_safety * dt_max = " + fmt(limit));
  }
  return st.dt;
}

diagnostics::Thresholds thresholds_for(const RunConfig& cfg) {
  diagnostics::Thresholds th;
  th.energy_tol = cfg.energy_tol;
  th.dissipation_weight = cfg.stepper.scheme == flow::Scheme::MinimizingMovement ? 1.0 : 0.5;
  th.cap_r = cfg.cap_r;
  return th;
}

}  // namespace kwc::config
