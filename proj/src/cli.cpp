#include "kwc/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "kwc/diagnostics.hpp"
#include "kwc/selftest.hpp"

namespace kwc::cli {

namespace fs = std::filesystem;

namespace {

const char* const kEnergyHeader =
    "step,time,dirichlet_eta,potential_G,weighted_tv,dirichlet_u,nu_term,gl_term,total,diss_increment";

std::string energy_row(const flow::StepRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.step << ',' << r.time << ',' << r.energy.csv_row() << ',' << r.diss_increment;
  return os.str();
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

// Streams records to energy.csv / stats.csv as they are produced, so a
// failed run leaves everything up to the failing step on disk.
class RunWriter {
 public:
  RunWriter(const fs::path& dir, int snapshot_stride)
      : dir_(dir), snapshot_stride_(snapshot_stride) {
    fs::create_directories(dir_ / "snapshots");
    energy_.open(dir_ / "energy.csv", std::ios::binary);
    stats_.open(dir_ / "stats.csv", std::ios::binary);
    if (!energy_ || !stats_) throw std::runtime_error("cannot create output files in " + dir_.string());
    energy_ << kEnergyHeader << '\n';
    stats_ << flow::StepRecord::csv_header() << '\n';
  }

  void record(const flow::StepRecord& r, const grid::FieldPair& U) {
    energy_ << energy_row(r) << '\n';
    stats_ << r.csv_row() << '\n';
    energy_.flush();
    stats_.flush();
    if (r.step == 0 || (snapshot_stride_ > 0 && r.step % snapshot_stride_ == 0)) snapshot(r.step, U);
    last_step_ = r.step;
  }

  void snapshot(int step, const grid::FieldPair& U) {
    grid::write_snapshot(dir_ / "snapshots" / ("step_" + std::to_string(step) + ".bin"), U);
  }

  int last_step() const { return last_step_; }

 private:
  fs::path dir_;
  int snapshot_stride_;
  std::ofstream energy_;
  std::ofstream stats_;
  int last_step_ = -1;
};

flow::Trajectory load_trajectory(const fs::path& dir, const config::RunConfig& cfg) {
  std::istringstream is(read_text(dir / "stats.csv"));
  std::string line;
  if (!std::getline(is, line) || line != flow::StepRecord::csv_header()) {
    throw std::runtime_error("stats.csv: unexpected header");
  }
  flow::Trajectory traj;
  traj.mode = flow::mode_of(cfg.stepper.scheme);
  while (std::getline(is, line)) {
    if (!line.empty()) traj.records.push_back(flow::StepRecord::from_csv(line));
  }
  if (traj.records.empty()) throw std::runtime_error("stats.csv has no records");
  for (std::size_t i = 1; i < traj.records.size(); ++i) {
    if (!(traj.records[i].time > traj.records[i - 1].time)) throw std::runtime_error("stats.csv: times not increasing");
  }
  return traj;
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

// Configuration of one continuation level, re-readable by `check`.
config::RunConfig level_config(const config::RunConfig& base, const flow::LevelResult& level, const fs::path& dir) {
  config::RunConfig c = base;
  auto& p = c.model.params;
  if (level.stage == "delta") {
    p.delta = level.value;
    c.stepper.scheme = base.penalized_scheme;
  } else {
    p.delta = 0.0;
    c.stepper.scheme = flow::Scheme::Projected;
    if (level.stage == "nu") {
      p.nu = level.value;
    } else {
      if (!base.schedule.nus.empty()) p.nu = base.schedule.nus.back();
      p.eps = level.value;
    }
  }
  c.stepper.dt = level.dt;
  c.dt_auto = false;
  c.out_dir = dir;
  c.schedule = {};
  return c;
}

}  // namespace

int cmd_run(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto U0 = grid::make_initial(cfg.initial, cfg.grid(), cfg.model.params.M);
  double dt = 0.0;
  try {
    dt = config::resolved_dt(cfg, U0);
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  config::RunConfig resolved = cfg;
  resolved.stepper.dt = dt;
  resolved.dt_auto = false;
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.resolved", resolved.to_text());

  RunWriter writer(cfg.out_dir, cfg.snapshot_stride);
  flow::Trajectory partial;
  partial.mode = flow::mode_of(cfg.stepper.scheme);
  partial.dt = dt;
  flow::EvolveOptions opts;
  opts.record_stride = cfg.record_stride;
  opts.on_record = [&](const flow::StepRecord& r, const grid::FieldPair& U) {
    partial.records.push_back(r);
    writer.record(r, U);
  };
  int status = kOk;
  flow::StepperConfig st = cfg.stepper;
  st.dt = dt;
  try {
    const auto traj = flow::evolve(U0, cfg.model, st, cfg.model.params.T, opts);
    if (writer.last_step() != traj.records.back().step || cfg.snapshot_stride == 0 ||
        traj.records.back().step % cfg.snapshot_stride != 0) {
      writer.snapshot(traj.records.back().step, *traj.final_state);
    }
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    status = kRuntimeError;
  }
  const auto rep = diagnostics::report(partial, cfg.model, config::thresholds_for(cfg));
  write_text(cfg.out_dir / "report.csv", rep.to_csv());
  out << "run: " << partial.records.back().step << " steps of dt = " << dt << ", final energy "
      << partial.records.back().energy.total << '\n';
  for (const auto& c : rep.checks) {
    out << "  " << (c.pass ? "ok  " : "FAIL") << ' ' << c.name << " = " << c.value << " (bound " << c.bound << ")\n";
  }
  return status;
}

int cmd_continuation(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto U0 = grid::make_initial(cfg.initial, cfg.grid(), cfg.model.params.M);
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.resolved", cfg.to_text());
  flow::ContinuationConfig cc;
  cc.schedule = cfg.schedule;
  cc.T = cfg.model.params.T;
  cc.penalized_scheme = cfg.penalized_scheme;
  cc.stepper = cfg.stepper;
  if (cfg.dt_auto) cc.stepper.dt = 0.0;
  cc.checkpoints = cfg.checkpoints;

  std::map<std::string, int> stage_index;
  auto on_level = [&](const flow::LevelResult& level) {
    const int idx = stage_index[level.stage]++;
    const fs::path dir = cfg.out_dir / (level.stage + "_" + std::to_string(idx));
    fs::create_directories(dir);
    const auto lc = level_config(cfg, level, dir);
    write_text(dir / "config.resolved", lc.to_text());
    if (!level.ok) {
      write_text(dir / "error.txt", level.error + "\n");
      err << "level " << level.stage << " = " << level.value << " failed: " << level.error << '\n';
      return;
    }
    RunWriter writer(dir, 0);
    // Only the initial and final states of a level are kept.
    for (const auto& r : level.trajectory.records) writer.record(r, U0);
    writer.snapshot(level.trajectory.records.back().step, *level.trajectory.final_state);
    write_text(dir / "report.csv", diagnostics::report(level.trajectory, lc.model, config::thresholds_for(lc)).to_csv());
    out << "level " << level.stage << " = " << level.value << ": gl_residual " << level.gl_residual
        << ", distance_prev " << level.distance_prev << ", final energy " << level.final_energy << '\n';
  };
  const auto rep = flow::continuation(U0, cfg.model, cc, on_level);

  std::ostringstream csv;
  csv.precision(17);
  csv << "stage,level,value,ok,gl_residual,gl_bound,distance_prev,final_energy,nu_term,weighted_tv,grad_u_L1,"
         "delta_slope,error\n";
  int status = kOk;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    const auto& l = rep.levels[i];
    if (!l.ok) status = kRuntimeError;
    csv << l.stage << ',' << i << ',' << l.value << ',' << (l.ok ? 1 : 0) << ',' << l.gl_residual << ','
        << l.gl_bound << ',';
    if (l.distance_prev >= 0.0) csv << l.distance_prev;
    csv << ',' << l.final_energy << ',' << l.nu_term << ',' << l.weighted_tv << ',' << l.grad_u_L1 << ',';
    if (l.stage == "delta" && rep.delta_slope) csv << *rep.delta_slope;
    csv << ',' << csv_safe(l.error) << '\n';
  }
  write_text(cfg.out_dir / "continuation.csv", csv.str());
  if (rep.delta_slope) out << "delta slope: " << *rep.delta_slope << '\n';
  return status;
}

int cmd_check(const fs::path& dir, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = config::resolve(config::parse_file(dir / "config.resolved"), config::Purpose::Run);
    const auto traj = load_trajectory(dir, cfg);
    // energy.csv must agree with the full records.
    std::istringstream es(read_text(dir / "energy.csv"));
    std::string line;
    std::getline(es, line);
    bool energy_ok = line == kEnergyHeader;
    std::size_t i = 0;
    while (energy_ok && std::getline(es, line)) {
      energy_ok = i < traj.records.size() && line == energy_row(traj.records[i]);
      ++i;
    }
    energy_ok = energy_ok && i == traj.records.size();
    const auto rep = diagnostics::report(traj, cfg.model, config::thresholds_for(cfg));
    const std::string text = rep.to_csv();
    const bool same = fs::exists(dir / "report.csv") && read_text(dir / "report.csv") == text;
    for (const auto& c : rep.checks) {
      out << (c.pass ? "ok   " : "FAIL ") << c.name << " = " << c.value << " (bound " << c.bound << ")\n";
    }
    out << "energy.csv consistent: " << (energy_ok ? "yes" : "no") << '\n';
    out << "report.csv reproduced: " << (same ? "yes" : "no") << '\n';
    return energy_ok && same && rep.all_pass() ? kOk : kCheckFailure;
  } catch (const std::exception& e) {
    err << "check failed: " << e.what() << '\n';
    return kCheckFailure;
  }
}

int cmd_selftest(const std::vector<std::string>& suites, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  selftest::SuiteOptions opts;
  opts.seed = seed;
  const auto& names = suites.empty() ? selftest::suite_names() : suites;
  bool ok = true;
  for (const auto& name : names) {
    selftest::SuiteResult r;
    try {
      r = selftest::run_suite(name, opts);
    } catch (const std::invalid_argument& e) {
      err << e.what() << '\n';
      return kConfigError;
    }
    out << "suite " << r.name << ": " << r.cases() << " cases, " << r.failures() << " failures (" << r.seconds
        << " s)\n";
    for (const auto& p : r.properties) {
      out << "  " << (p.pass() ? "ok   " : "FAIL ") << p.name << ": " << p.cases << " cases, max residual "
          << p.max_residual << " (tol " << p.tolerance << ")\n";
      for (const auto& f : p.failure_log) err << "    " << f << '\n';
    }
    ok = ok && r.pass();
  }
  return ok ? kOk : kCheckFailure;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orientation phase-field gradient-flow solver"};
  app.require_subcommand(1);
  std::string config_path;
  bool dry_run = false;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> suites;
  std::string check_dir;

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_flag("--dry-run", dry_run, "validate and print the resolved configuration");
    sub->add_option("--seed", seed, "override the configured seed");
  };
  auto* run = app.add_subcommand("run", "evolve one configuration");
  add_run_options(run);
  auto* cont = app.add_subcommand("continuation", "delta -> nu -> eps parameter continuation");
  add_run_options(cont);
  auto* check = app.add_subcommand("check", "re-verify a run directory");
  check->add_option("dir", check_dir, "run output directory")->required();
  auto* self = app.add_subcommand("selftest", "randomized property suites");
  self->add_option("--suite", suites, "suite name (repeatable): exterior, rotrep, model, grad");
  self->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (check->parsed()) return cmd_check(check_dir, out, err);
    if (self->parsed()) return cmd_selftest(suites, seed.value_or(selftest::SuiteOptions{}.seed), out, err);

    const auto purpose = run->parsed() ? config::Purpose::Run : config::Purpose::Continuation;
    config::RunConfig cfg;
    try {
      auto raw = config::parse_file(config_path);
      if (seed) raw["seed"] = {std::to_string(*seed), 0};
      cfg = config::resolve(raw, purpose);
    } catch (const config::ConfigError& e) {
      err << "config error: " << e.what() << '\n';
      return kConfigError;
    }
    if (dry_run) {
      out << cfg.to_text();
      return kOk;
    }
    return purpose == config::Purpose::Run ? cmd_run(cfg, out, err) : cmd_continuation(cfg, out, err);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace kwc::cli
