#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kwc/exterior.hpp"

using namespace kwc::exterior;

namespace {

// Oracle: a k-vector as a map from sorted index tuple to coefficient, with
// products formed by concatenation and bubble-sort parity.
using Blade = std::vector<int>;
using Dict = std::map<Blade, double>;

int sort_sign(Blade& b) {
  int sign = 1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j + 1 < b.size() - i; ++j) {
      if (b[j] == b[j + 1]) return 0;
      if (b[j] > b[j + 1]) {
        std::swap(b[j], b[j + 1]);
        sign = -sign;
      }
    }
  }
  for (std::size_t j = 0; j + 1 < b.size(); ++j) {
    if (b[j] == b[j + 1]) return 0;
  }
  return sign;
}

std::vector<Blade> blades(int m, int k) {
  std::vector<Blade> out;
  Blade cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i <= m; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 1);
  return out;
}

Dict to_dict(const MultiVector& a) {
  Dict d;
  const auto bs = blades(a.dim(), a.grade());
  for (std::size_t i = 0; i < bs.size(); ++i) d[bs[i]] = a[i];
  return d;
}

Dict dict_wedge(const Dict& a, const Dict& b) {
  Dict out;
  for (const auto& [ba, ca] : a) {
    for (const auto& [bb, cb] : b) {
      Blade c = ba;
      c.insert(c.end(), bb.begin(), bb.end());
      const int s = sort_sign(c);
      if (s != 0) out[c] += s * ca * cb;
    }
  }
  return out;
}

// *e_a = sign(a, a^c) e_{a^c}
Dict dict_hodge(const Dict& a, int m) {
  Dict out;
  for (const auto& [ba, ca] : a) {
    Blade comp;
    for (int i = 1; i <= m; ++i) {
      if (std::find(ba.begin(), ba.end(), i) == ba.end()) comp.push_back(i);
    }
    Blade all = ba;
    all.insert(all.end(), comp.begin(), comp.end());
    out[comp] += sort_sign(all) * ca;
  }
  return out;
}

double dict_diff(const Dict& a, const MultiVector& b) {
  auto db = to_dict(b);
  double err = 0.0;
  for (const auto& [k, v] : db) {
    auto it = a.find(k);
    err = std::max(err, std::abs(v - (it == a.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, v] : a) {
    if (!db.count(k)) err = std::max(err, std::abs(v));
  }
  return err;
}

MultiVector random_mv(std::mt19937_64& rng, int m, int k) {
  std::normal_distribution<double> nd;
  std::vector<double> c(static_cast<std::size_t>(binomial(m, k)));
  for (auto& x : c) x = nd(rng);
  return MultiVector(m, k, c);
}

}  // namespace

TEST_CASE("generators: wedge sign and hodge in R^3") {
  const auto e1 = MultiVector::basis(KIndex(3, {1}));
  const auto e2 = MultiVector::basis(KIndex(3, {2}));
  const auto e12 = wedge(e1, e2);
  CHECK(e12.grade() == 2);
  CHECK(e12.coeff(KIndex(3, {1, 2})) == 1.0);
  CHECK(wedge(e2, e1).coeff(KIndex(3, {1, 2})) == -1.0);
  const auto s = hodge(e12);
  CHECK(s.grade() == 1);
  CHECK(s.coeff(KIndex(3, {3})) == 1.0);
  for (int m = 1; m <= 6; ++m) {
    const auto vol = hodge(MultiVector::scalar(m, 1.0));
    CHECK(vol.grade() == m);
    CHECK(vol[0] == 1.0);
  }
}

TEST_CASE("inner and norm on basis elements") {
  const auto e12 = MultiVector::basis(KIndex(3, {1, 2}));
  const auto e13 = MultiVector::basis(KIndex(3, {1, 3}));
  CHECK(inner(e12, e12) == 1.0);
  CHECK(inner(e12, e13) == 0.0);
  CHECK(norm(e12) == 1.0);
  const std::vector<double> v{3.0, 4.0, 0.0};
  CHECK(norm(MultiVector::vector(v)) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("errors: grade overflow, dimension mismatch, bad indices") {
  const auto a = MultiVector::basis(KIndex(3, {1, 2}));
  const auto b = MultiVector::basis(KIndex(3, {2, 3}));
  CHECK_THROWS_AS(wedge(a, b), ExteriorError);
  CHECK_THROWS_AS(wedge(MultiVector::basis(KIndex(3, {1})), MultiVector::basis(KIndex(4, {1}))), ExteriorError);
  CHECK_THROWS_AS(inner(a, MultiVector::basis(KIndex(3, {1}))), ExteriorError);
  CHECK_THROWS_AS(KIndex(3, {2, 1}), ExteriorError);
  CHECK_THROWS_AS(KIndex(3, {1, 4}), ExteriorError);
  CHECK_THROWS_AS(MultiVector(9, 1), ExteriorError);
  CHECK_THROWS_AS(MultiVector(3, 1, {1.0, 2.0}), ExteriorError);
}

TEST_CASE("basis order is lexicographic") {
  const auto& b = basis_masks(4, 2);
  const auto ref = blades(4, 2);
  REQUIRE(b.size() == ref.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::uint32_t mask = 0;
    for (int j : ref[i]) mask |= 1u << (j - 1);
    CHECK(b[i] == mask);
    CHECK(basis_position(4, mask) == i);
  }
}

TEST_CASE("wedge and hodge agree with the permutation oracle") {
  std::mt19937_64 rng(7);
  for (int m = 1; m <= 6; ++m) {
    for (int k = 0; k <= m; ++k) {
      for (int l = 0; k + l <= m; ++l) {
        const auto a = random_mv(rng, m, k);
        const auto b = random_mv(rng, m, l);
        CHECK(dict_diff(dict_wedge(to_dict(a), to_dict(b)), wedge(a, b)) < 1e-13);
      }
      const auto a = random_mv(rng, m, k);
      CHECK(dict_diff(dict_hodge(to_dict(a), m), hodge(a)) == 0.0);
    }
  }
}

TEST_CASE("identity suite: commutation, double hodge, inner via hodge, norm") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 6);
    const int k = static_cast<int>(rng() % (m + 1));
    const int l = static_cast<int>(rng() % (m - k + 1));
    const auto a = random_mv(rng, m, k);
    const auto b = random_mv(rng, m, l);
    const double sc = 1.0 + norm(a) * norm(b);
    const double sgn = (k * l) % 2 ? -1.0 : 1.0;
    CHECK(norm(wedge(a, b) - sgn * wedge(b, a)) <= 1e-12 * sc);
    const double hs = (k * (m - k)) % 2 ? -1.0 : 1.0;
    CHECK(norm(hodge(hodge(a)) - hs * a) <= 1e-12 * (1.0 + norm(a)));
    CHECK(std::abs(norm(hodge(a)) - norm(a)) <= 1e-12 * (1.0 + norm(a)));
    const auto c = random_mv(rng, m, k);
    const auto top = wedge(a, hodge(c));
    CHECK(std::abs(inner(a, c) - top[0]) <= 1e-12 * (1.0 + norm(a) * norm(c)));
  }
}

TEST_CASE("generator Cauchy-Schwarz and associativity") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 5);
    std::vector<double> v(m);
    for (auto& x : v) x = nd(rng);
    const auto a = MultiVector::vector(v);
    const int k = static_cast<int>(rng() % m);
    const auto eta = random_mv(rng, m, k);
    CHECK(norm(wedge(a, eta)) <= norm(a) * norm(eta) * (1.0 + 1e-12));
    const auto u1 = random_mv(rng, m, 1), u2 = random_mv(rng, m, 1);
    const auto u3 = random_mv(rng, m, 1);
    if (m >= 3) CHECK(norm(wedge(wedge(u1, u2), u3) - wedge(u1, wedge(u2, u3))) < 1e-12 * 10.0);
  }
}

TEST_CASE("a ^ a vanishes for vectors") {
  std::mt19937_64 rng(3);
  for (int m = 2; m <= 6; ++m) {
    const auto a = random_mv(rng, m, 1);
    CHECK(norm(wedge(a, a)) == 0.0);
  }
}

TEST_CASE("triple and muuibn residuals") {
  const double e1[] = {1, 0, 0, 0}, e2[] = {0, 1, 0, 0}, e3[] = {0, 0, 1, 0};
  CHECK(triple_identity_residual(e1, e2, e3) == 0.0);
  CHECK(muuibn_residual(e1, e2) == 0.0);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(4), b(4), c(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = nd(rng);
      b[i] = nd(rng);
      c[i] = nd(rng);
    }
    auto n = [](const std::vector<double>& x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]); };
    CHECK(triple_identity_residual(a, b, c) <= 1e-12 * (1.0 + n(a) * n(b) * n(c)));
    CHECK(triple_identity_residual(a, b, b) == 0.0);
    CHECK(muuibn_residual(a, b) <= 1e-12 * (1.0 + n(a) * n(b) * n(b)));
    CHECK(muuibn_residual(a, a) <= 1e-12 * (1.0 + std::pow(n(a), 3)));
  }
}
