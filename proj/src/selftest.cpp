#include "kwc/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kwc/energy.hpp"
#include "kwc/exterior.hpp"
#include "kwc/rotrep.hpp"

namespace kwc::selftest {

namespace {

using Rng = std::mt19937_64;
using exterior::MultiVector;

constexpr int kMaxLogged = 5;

std::string join(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  os << ']';
  return os.str();
}

// Runs `cases` trials of `trial`, which returns (residual, description of the
// inputs); a case fails when residual > tol or the trial throws.
PropertyResult run_property(const std::string& name, long cases, double tol,
                            const std::function<std::pair<double, std::string>(long)>& trial) {
  PropertyResult r{name, cases, 0, 0.0, tol, {}};
  for (long i = 0; i < cases; ++i) {
    double res = 0.0;
    std::string what;
    try {
      std::tie(res, what) = trial(i);
    } catch (const std::exception& e) {
      res = std::numeric_limits<double>::infinity();
      what = std::string("threw: ") + e.what();
    }
    if (!(res <= tol)) {
      ++r.failures;
      if (static_cast<int>(r.failure_log.size()) < kMaxLogged) {
        std::ostringstream os;
        os.precision(6);
        os << name << " case " << i << ": residual " << res << " > " << tol << " for " << what;
        r.failure_log.push_back(os.str());
      }
    }
    if (std::isfinite(res)) r.max_residual = std::max(r.max_residual, res);
  }
  return r;
}

std::vector<double> random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = d(rng);
  return v;
}

MultiVector random_multivector(Rng& rng, int m, int k) {
  return MultiVector(m, k, random_vector(rng, static_cast<int>(exterior::binomial(m, k))));
}

std::string describe(const MultiVector& a) {
  return "m=" + std::to_string(a.dim()) + " k=" + std::to_string(a.grade()) + " " + join(a.coeffs());
}

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

SuiteResult exterior_suite(const SuiteOptions& o) {
  using namespace exterior;
  constexpr double kTol = 1e-12;
  Rng rng(o.seed);
  SuiteResult s{"exterior", {}, 0.0};
  const long n = o.exterior_cases;

  s.properties.push_back(run_property("wedge-comm", n, kTol, [&](long) {
    const int m = pick(rng, 1, 6);
    const int k = pick(rng, 0, m);
    const int l = pick(rng, 0, m - k);
    const auto a = random_multivector(rng, m, k);
    const auto b = random_multivector(rng, m, l);
    const double sign = (k * l) % 2 ? -1.0 : 1.0;
    const double res = norm(wedge(a, b) - sign * wedge(b, a)) / (1.0 + norm(a) * norm(b));
    return std::pair{res, describe(a) + " ^ " + describe(b)};
  }));
  s.properties.push_back(run_property("dobleprod", n, kTol, [&](long) {
    const int m = pick(rng, 1, 6);
    const int k = pick(rng, 0, m);
    const auto a = random_multivector(rng, m, k);
    const double sign = (k * (m - k)) % 2 ? -1.0 : 1.0;
    return std::pair{norm(hodge(hodge(a)) - sign * a) / (1.0 + norm(a)), describe(a)};
  }));
  s.properties.push_back(run_property("tripleprod", n, kTol, [&](long) {
    const int m = pick(rng, 2, 6);
    const auto a = random_vector(rng, m), b = random_vector(rng, m), c = random_vector(rng, m);
    const double scale = 1.0 + norm(MultiVector::vector(a)) * norm(MultiVector::vector(b)) *
                                   norm(MultiVector::vector(c));
    return std::pair{triple_identity_residual(a, b, c) / scale, "a=" + join(a) + " b=" + join(b) + " c=" + join(c)};
  }));
  s.properties.push_back(run_property("muuibn", n, kTol, [&](long) {
    const int m = pick(rng, 2, 6);
    const auto a = random_vector(rng, m), b = random_vector(rng, m);
    const double nb = norm(MultiVector::vector(b));
    const double scale = 1.0 + norm(MultiVector::vector(a)) * nb * nb;
    return std::pair{muuibn_residual(a, b) / scale, "a=" + join(a) + " b=" + join(b)};
  }));
  s.properties.push_back(run_property("hodge_inner", n, kTol, [&](long) {
    const int m = pick(rng, 1, 6);
    const int k = pick(rng, 0, m);
    const auto a = random_multivector(rng, m, k);
    const auto b = random_multivector(rng, m, k);
    const double top = wedge(a, hodge(b))[0];
    return std::pair{std::abs(inner(a, b) - top) / (1.0 + norm(a) * norm(b)), describe(a) + " , " + describe(b)};
  }));
  s.properties.push_back(run_property("normhodge", n, kTol, [&](long) {
    const int m = pick(rng, 1, 6);
    const auto a = random_multivector(rng, m, pick(rng, 0, m));
    return std::pair{std::abs(norm(hodge(a)) - norm(a)) / (1.0 + norm(a)), describe(a)};
  }));
  s.properties.push_back(run_property("CSformultivector", n, kTol, [&](long i) {
    // a is a (scaled) basis generator on even cases, a vector on odd ones.
    const int m = pick(rng, 1, 6);
    MultiVector a(m, 0);
    if (i % 2 == 0) {
      const int k = pick(rng, 0, m);
      const auto& masks = basis_masks(m, k);
      const std::uint32_t mask = masks[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(masks.size()) - 1))];
      std::vector<double> c(masks.size(), 0.0);
      c[basis_position(m, mask)] = random_vector(rng, 1, -3.0, 3.0)[0];
      a = MultiVector(m, k, std::move(c));
    } else {
      a = MultiVector::vector(random_vector(rng, m));
    }
    const auto eta = random_multivector(rng, m, pick(rng, 0, m - a.grade()));
    const double lhs = norm(wedge(a, eta));
    const double rhs = norm(a) * norm(eta);
    return std::pair{std::max(0.0, lhs - rhs) / (1.0 + rhs), describe(a) + " ^ " + describe(eta)};
  }));
  return s;
}

rotrep::UnitQuaternion random_quaternion(Rng& rng) {
  std::normal_distribution<double> g;
  double q[4];
  double n = 0.0;
  do {
    n = 0.0;
    for (double& x : q) {
      x = g(rng);
      n += x * x;
    }
  } while (n < 1e-6);
  n = std::sqrt(n);
  return {q[0] / n, q[1] / n, q[2] / n, q[3] / n};
}

std::array<double, 3> random_axis(Rng& rng) {
  std::normal_distribution<double> g;
  std::array<double, 3> a{};
  double n = 0.0;
  do {
    a = {g(rng), g(rng), g(rng)};
    n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  } while (n < 1e-6);
  for (double& x : a) x /= n;
  return a;
}

std::string describe(const rotrep::UnitQuaternion& q) { return join(q.coeffs()); }

double quat_diff(const rotrep::UnitQuaternion& a, const rotrep::UnitQuaternion& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

SuiteResult rotrep_suite(const SuiteOptions& o) {
  using namespace rotrep;
  constexpr double kTol = 1e-10;
  Rng rng(o.seed + 1);
  SuiteResult s{"rotrep", {}, 0.0};
  const long n = o.rotation_cases;
  std::uniform_real_distribution<double> angle(0.0, 3.0);

  s.properties.push_back(run_property("homomorphism", n, kTol, [&](long) {
    const auto a = random_quaternion(rng), b = random_quaternion(rng);
    const double res = max_abs_diff(quat_to_rotmat(a * b), quat_to_rotmat(a) * quat_to_rotmat(b));
    return std::pair{res, describe(a) + " * " + describe(b)};
  }));
  s.properties.push_back(run_property("double-cover", n, kTol, [&](long) {
    const auto q = random_quaternion(rng);
    const double res = max_abs_diff(quat_to_rotmat(q), quat_to_rotmat(q.negated()));
    return std::pair{res, describe(q)};
  }));
  s.properties.push_back(run_property("round-trip", n, kTol, [&](long) {
    const AxisAngle aa{angle(rng), random_axis(rng)};
    const auto q = axisangle_to_quat(aa);
    const auto back = rotmat_to_quat(quat_to_rotmat(q));
    const double res = std::max(quat_diff(q, back), std::abs(2.0 * std::acos(back[0]) - aa.angle));
    return std::pair{res, "angle=" + std::to_string(aa.angle) + " axis=" + join(aa.axis)};
  }));
  s.properties.push_back(run_property("hemisphere", n, kTol, [&](long) {
    // Both lifts of a rotation map back to the q0 > 0 representative.
    const auto q = random_quaternion(rng);
    const auto up = q[0] >= 0.0 ? q : q.negated();
    if (up[0] < 1e-6) return std::pair{0.0, std::string("near equator, skipped")};
    const auto back = rotmat_to_quat(quat_to_rotmat(q.negated()));
    return std::pair{quat_diff(up, back), describe(q)};
  }));
  s.properties.push_back(run_property("equator-ambiguity", std::max<long>(1, n / 10), 0.0, [&](long) {
    const AxisAngle aa{std::numbers::pi, random_axis(rng)};
    try {
      rotmat_to_quat(quat_to_rotmat(axisangle_to_quat(aa)));
    } catch (const AmbiguousRepresentative&) {
      return std::pair{0.0, std::string()};
    }
    return std::pair{1.0, "rotation by pi about " + join(aa.axis) + " was not rejected"};
  }));
  s.properties.push_back(run_property("cap-ball", n, 0.0, [&](long) {
    const int M = pick(rng, 2, 6);
    std::normal_distribution<double> g;
    std::vector<double> p(static_cast<std::size_t>(M));
    double nn = 0.0;
    for (double& x : p) {
      x = g(rng);
      nn += x * x;
    }
    for (double& x : p) x /= std::sqrt(nn);
    if (p[0] < -1.0 + 1e-9) return std::pair{0.0, std::string("antipode, skipped")};
    const SpherePoint sp(p);
    const double r = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    // Points within rounding of the boundary are ambiguous on either side.
    if (std::abs(p[0] - r) < 1e-12) return std::pair{0.0, std::string("on boundary, skipped")};
    const bool same = in_cap(sp, r) == (radial_coordinate(sp) <= std::acos(r));
    return std::pair{same ? 0.0 : 1.0, join(p) + " r=" + std::to_string(r)};
  }));
  return s;
}

// Central differences of scalar functions against analytic derivatives.
SuiteResult model_suite(const SuiteOptions& o) {
  constexpr double kTol = 1e-6;
  constexpr double kStep = 1e-6;
  Rng rng(o.seed + 2);
  SuiteResult s{"model", {}, 0.0};
  const long n = o.rotation_cases;
  const auto funcs = model::default_model_functions(model::AlphaVariant::Quadratic);
  auto rel = [](double fd, double an) {
    const double scale = std::max({std::abs(fd), std::abs(an), 1e-3});
    return std::abs(fd - an) / scale;
  };
  std::uniform_real_distribution<double> eta(-0.9, 1.9);

  s.properties.push_back(run_property("alpha-prime", n, kTol, [&](long) {
    const double x = eta(rng);
    const double fd = (funcs.alpha(x + kStep) - funcs.alpha(x - kStep)) / (2 * kStep);
    return std::pair{rel(fd, funcs.alpha_prime(x)), "s=" + std::to_string(x)};
  }));
  s.properties.push_back(run_property("g-is-G-prime", n, kTol, [&](long) {
    const double x = eta(rng);
    const double fd = (funcs.G(x + kStep) - funcs.G(x - kStep)) / (2 * kStep);
    return std::pair{rel(fd, funcs.g(x)), "s=" + std::to_string(x)};
  }));
  s.properties.push_back(run_property("grad-f-eps", n, kTol, [&](long) {
    const int len = pick(rng, 1, 12);
    auto W = random_vector(rng, len);
    const double eps = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    std::vector<double> an(W.size());
    model::grad_f_eps(W, eps, an);
    double worst = 0.0;
    for (std::size_t i = 0; i < W.size(); ++i) {
      const double x0 = W[i];
      W[i] = x0 + kStep;
      const double fp = model::f_eps(W, eps);
      W[i] = x0 - kStep;
      const double fm = model::f_eps(W, eps);
      W[i] = x0;
      worst = std::max(worst, rel((fp - fm) / (2 * kStep), an[i]));
    }
    return std::pair{worst, "W=" + join(W) + " eps=" + std::to_string(eps)};
  }));
  s.properties.push_back(run_property("varpi-delta", n, kTol, [&](long) {
    auto w = random_vector(rng, pick(rng, 2, 6));
    const double delta = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    std::vector<double> an(w.size());
    model::varpi_delta(w, delta, an);
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double x0 = w[i];
      w[i] = x0 + kStep;
      const double fp = model::pi_delta(w, delta);
      w[i] = x0 - kStep;
      const double fm = model::pi_delta(w, delta);
      w[i] = x0;
      worst = std::max(worst, rel((fp - fm) / (2 * kStep), an[i]));
    }
    return std::pair{worst, "w=" + join(w) + " delta=" + std::to_string(delta)};
  }));
  return s;
}

SuiteResult grad_suite(const SuiteOptions& o) {
  constexpr double kTol = 1e-5;
  Rng rng(o.seed + 3);
  SuiteResult s{"grad", {}, 0.0};
  const auto g = grid::Grid::uniform({8, 8}, 1.0 / 8);
  s.properties.push_back(run_property("grad-check", o.grad_states, kTol, [&](long i) {
    model::ModelParams p;
    p.eps = 0.1;
    p.delta = 0.1;
    p.M = 4;
    p.nu = i % 2 ? 0.3 : 0.0;
    const energy::Model m{p, model::default_model_functions(model::AlphaVariant::Quadratic)};
    grid::FieldPair U(grid::Field(g, 1), grid::Field(g, 4));
    U.eta.data = random_vector(rng, static_cast<int>(g.ncells()), 0.0, 1.0);
    U.u.data = random_vector(rng, static_cast<int>(g.ncells() * 4));
    const std::uint64_t probe_seed = rng();
    const double res = energy::grad_check(U, m, probe_seed);
    return std::pair{res, "state " + std::to_string(i) + " nu=" + std::to_string(p.nu) +
                              " probe_seed=" + std::to_string(probe_seed)};
  }));
  return s;
}

}  // namespace

long SuiteResult::cases() const {
  long n = 0;
  for (const auto& p : properties) n += p.cases;
  return n;
}

long SuiteResult::failures() const {
  long n = 0;
  for (const auto& p : properties) n += p.failures;
  return n;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"exterior", "rotrep", "model", "grad"};
  return names;
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  if (name == "exterior") {
    r = exterior_suite(opts);
  } else if (name == "rotrep") {
    r = rotrep_suite(opts);
  } else if (name == "model") {
    r = model_suite(opts);
  } else if (name == "grad") {
    r = grad_suite(opts);
  } else {
    throw std::invalid_argument("unknown suite '" + name + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace kwc::selftest
