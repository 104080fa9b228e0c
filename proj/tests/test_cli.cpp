#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kwc/cli.hpp"
#include "kwc/config.hpp"

using namespace kwc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kwc_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string small_run(const fs::path& out_dir, const std::string& scheme = "minimizing-movement") {
  return "seed = 3\n[grid]\ndims = 8x8\nh = 0.125\n[model]\neps = 0.1\ndelta = 0.1\nT = 0.03\n"
         "[initial]\nkind = bicrystal\ngrain_a_angle = 0.6\ngrain_b_angle = 0.6\ngrain_b_axis = 1, 0, 0\n"
         "[stepper]\nscheme = " +
         scheme + "\ndt = auto\n[output]\ndir = " + out_dir.string() + "\nsnapshot_stride = 2\n";
}

struct Invocation {
  int code;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "kwc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string where_of(const std::string& text, config::Purpose purpose = config::Purpose::Run) {
  try {
    config::resolve(config::parse(text), purpose);
  } catch (const config::ConfigError& e) {
    return e.where();
  }
  return "";
}

}  // namespace

TEST_CASE("parser: comments, sections, line numbers") {
  const auto raw = config::parse("# header\nseed = 7  # trailing\n\n[grid]\n  dims = 4x4\nh=0.25\n");
  CHECK(raw.at("seed").value == "7");
  CHECK(raw.at("seed").line == 2);
  CHECK(raw.at("grid.dims").value == "4x4");
  CHECK(raw.at("grid.h").line == 6);

  auto where = [](const std::string& text) {
    try {
      config::parse(text);
    } catch (const config::ConfigError& e) {
      return e.where();
    }
    return std::string();
  };
  CHECK(where("seed = 1\nfoo = 2\n") == "line 2");
  CHECK(where("seed = 1\nseed = 2\n") == "line 2");
  CHECK(where("[grid\n") == "line 1");
  CHECK(where("[grid]\nh =\n") == "line 2");
  CHECK(where("just words\n") == "line 1");
  CHECK(where("[model]\nbogus = 1\n") == "line 2");
}

TEST_CASE("resolve names the offending key") {
  CHECK(where_of("") == "seed");
  CHECK(where_of("seed = 1\n") == "grid.dims");
  const std::string base = small_run("/tmp/unused");
  CHECK(where_of(base).empty());
  CHECK(where_of(base + "[model]\n") == "");  // re-opening a section is fine
  CHECK(where_of("seed = x\n" + base.substr(base.find('\n') + 1)) == "seed");
  auto with = [&](const std::string& from, const std::string& to) {
    auto t = base;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  CHECK(where_of(with("dims = 8x8", "dims = 1x8")) == "grid.dims");
  CHECK(where_of(with("h = 0.125", "h = -1")) == "grid.h");
  CHECK(where_of(with("eps = 0.1", "eps = 0")) == "model.eps");
  CHECK(where_of(with("delta = 0.1", "delta = 0")) == "model.delta");
  CHECK(where_of(with("dt = auto", "dt = 0.05")) == "stepper.dt");  // above 1/R0
  CHECK(where_of(with("kind = bicrystal", "kind = nonsense")) == "initial.kind");
  CHECK(where_of(with("minimizing-movement", "leapfrog")) == "stepper.scheme");
  CHECK(where_of(with("minimizing-movement", "projected")) == "model.delta");
  CHECK(where_of(base) == "");
  CHECK(where_of(base, config::Purpose::Continuation) == "continuation.deltas");
  CHECK(where_of(base + "[continuation]\ndeltas = 0.1, 0.2\n", config::Purpose::Continuation) ==
        "continuation.deltas");
}

TEST_CASE("to_text round trips") {
  const auto cfg = config::resolve(config::parse(small_run("/tmp/rt") + "[continuation]\nnus = 0.2, 0.1\n"),
                                   config::Purpose::Run);
  const auto text = cfg.to_text();
  const auto again = config::resolve(config::parse(text), config::Purpose::Run);
  CHECK(again.to_text() == text);
  CHECK(again.dt_auto);
  CHECK(again.schedule.nus == std::vector<double>{0.2, 0.1});
  CHECK(again.model.params.eps == 0.1);
}

TEST_CASE("exit codes: dry run, config errors, usage") {
  const auto dir = scratch("dry");
  const auto out_dir = dir / "out";
  spit(dir / "a.cfg", small_run(out_dir));
  auto r = invoke({"run", "--config", (dir / "a.cfg").string(), "--dry-run"});
  CHECK(r.code == 0);
  CHECK(r.out.find("scheme = minimizing-movement") != std::string::npos);
  CHECK_FALSE(fs::exists(out_dir));

  r = invoke({"run", "--config", (dir / "a.cfg").string(), "--dry-run", "--seed", "99"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("seed = 99\n", 0) == 0);

  spit(dir / "bad.cfg", "seed = 1\nfoo = 2\n");
  r = invoke({"run", "--config", (dir / "bad.cfg").string()});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(invoke({"run", "--config", (dir / "missing.cfg").string()}).code == cli::kConfigError);
  CHECK(invoke({"run"}).code == cli::kConfigError);
  CHECK(invoke({}).code == cli::kConfigError);
  CHECK(invoke({"continuation", "--config", (dir / "a.cfg").string()}).code == cli::kConfigError);
}

TEST_CASE("run then check; tampering is detected") {
  const auto dir = scratch("run");
  const auto out_dir = dir / "out";
  spit(dir / "a.cfg", small_run(out_dir));
  const auto r = invoke({"run", "--config", (dir / "a.cfg").string()});
  REQUIRE(r.code == 0);
  for (const char* f : {"config.resolved", "energy.csv", "stats.csv", "report.csv", "snapshots/step_0.bin"}) {
    CHECK_MESSAGE(fs::exists(out_dir / f), f);
  }
  CHECK(invoke({"check", out_dir.string()}).code == 0);

  const auto report = slurp(out_dir / "report.csv");
  auto tampered = report;
  tampered[tampered.find(',') + 1] = tampered[tampered.find(',') + 1] == '9' ? '8' : '9';
  spit(out_dir / "report.csv", tampered);
  CHECK(invoke({"check", out_dir.string()}).code == cli::kCheckFailure);
  spit(out_dir / "report.csv", report);
  CHECK(invoke({"check", out_dir.string()}).code == 0);

  const auto energy = slurp(out_dir / "energy.csv");
  spit(out_dir / "energy.csv", energy.substr(0, energy.rfind('\n', energy.size() - 2) + 1));
  CHECK(invoke({"check", out_dir.string()}).code == cli::kCheckFailure);
  CHECK(invoke({"check", (dir / "nowhere").string()}).code == cli::kCheckFailure);
}

TEST_CASE("runs are byte-for-byte reproducible") {
  const auto dir = scratch("repro");
  spit(dir / "a.cfg", small_run(dir / "a"));
  spit(dir / "b.cfg", small_run(dir / "b"));
  REQUIRE(invoke({"run", "--config", (dir / "a.cfg").string()}).code == 0);
  REQUIRE(invoke({"run", "--config", (dir / "b.cfg").string()}).code == 0);
  CHECK(slurp(dir / "a" / "energy.csv") == slurp(dir / "b" / "energy.csv"));
  CHECK(slurp(dir / "a" / "stats.csv") == slurp(dir / "b" / "stats.csv"));
  CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
}

TEST_CASE("selftest subcommand") {
  auto r = invoke({"selftest", "--suite", "rotrep"});
  CHECK(r.code == 0);
  CHECK(r.out.find("suite rotrep") != std::string::npos);
  CHECK(invoke({"selftest", "--suite", "nope"}).code == cli::kConfigError);
}

TEST_CASE("single-level continuation leaves the slope empty") {
  const auto dir = scratch("cont");
  spit(dir / "c.cfg", small_run(dir / "out", "explicit") + "[continuation]\ndeltas = 0.1\n");
  const auto r = invoke({"continuation", "--config", (dir / "c.cfg").string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir / "out" / "continuation.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header.find("delta_slope") != std::string::npos);
  CHECK(row.rfind("delta,0,", 0) == 0);
  // ..., grad_u_L1, delta_slope, error  ->  the last two fields are empty
  CHECK(row.substr(row.size() - 2) == ",,");
  CHECK(invoke({"check", (dir / "out" / "delta_0").string()}).code == 0);
}
