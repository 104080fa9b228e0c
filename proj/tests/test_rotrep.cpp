#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "kwc/rotrep.hpp"

using namespace kwc::rotrep;

namespace {

// Rodrigues formula, independent of the quaternion route.
RotationMatrix rodrigues(double w, std::array<double, 3> n) {
  const double c = std::cos(w), s = std::sin(w), t = 1.0 - c;
  const double x = n[0], y = n[1], z = n[2];
  return RotationMatrix({t * x * x + c, t * x * y - s * z, t * x * z + s * y,  //
                         t * x * y + s * z, t * y * y + c, t * y * z - s * x,  //
                         t * x * z - s * y, t * y * z + s * x, t * z * z + c});
}

std::array<double, 3> random_axis(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::array<double, 3> a{nd(rng), nd(rng), nd(rng)};
  const double n = std::hypot(a[0], a[1], a[2]);
  for (auto& x : a) x /= n;
  return a;
}

}  // namespace

TEST_CASE("axis-angle to quaternion") {
  const auto id = axisangle_to_quat({0.0, {0, 0, 1}});
  CHECK(id[0] == 1.0);
  CHECK(id[3] == 0.0);
  const auto q = axisangle_to_quat({std::numbers::pi / 2, {0, 0, 1}});
  CHECK(q[0] == doctest::Approx(std::cos(std::numbers::pi / 4)));
  CHECK(q[1] == 0.0);
  CHECK(q[3] == doctest::Approx(std::sin(std::numbers::pi / 4)));
  const auto eq = axisangle_to_quat({std::numbers::pi, {1, 0, 0}});
  CHECK(std::abs(eq[0]) < 1e-15);
  CHECK_THROWS_AS(axisangle_to_quat({-0.1, {1, 0, 0}}), RotationError);
  CHECK_THROWS_AS(axisangle_to_quat({0.1, {1, 1, 0}}), RotationError);
}

TEST_CASE("quaternion to matrix: identity, quarter turn, double cover") {
  CHECK(max_abs_diff(quat_to_rotmat(UnitQuaternion::identity()), RotationMatrix::identity()) == 0.0);
  const auto R = quat_to_rotmat(axisangle_to_quat({std::numbers::pi / 2, {0, 0, 1}}));
  const auto ey = R.apply({1, 0, 0});
  CHECK(ey[0] == doctest::Approx(0.0).scale(1.0));
  CHECK(ey[1] == doctest::Approx(1.0));
  CHECK(ey[2] == doctest::Approx(0.0).scale(1.0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0.0, std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double w = ang(rng);
    const auto n = random_axis(rng);
    const auto q = axisangle_to_quat({w, n});
    CHECK(max_abs_diff(quat_to_rotmat(q), rodrigues(w, n)) < 1e-12);
    CHECK(max_abs_diff(quat_to_rotmat(q), quat_to_rotmat(q.negated())) == 0.0);
  }
  CHECK_THROWS_AS(UnitQuaternion(1.0, 0.1, 0.0, 0.0), RotationError);
}

TEST_CASE("matrix to quaternion: round trip, hemisphere, equator error") {
  CHECK(rotmat_to_quat(RotationMatrix::identity())[0] == 1.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double w = ang(rng);
    const auto n = random_axis(rng);
    const auto q = axisangle_to_quat({w, n});
    const auto back = rotmat_to_quat(rodrigues(w, n));
    double err = 0.0;
    for (int k = 0; k < 4; ++k) err = std::max(err, std::abs(back[k] - q[k]));
    CHECK(err <= 1e-10);
    CHECK(back[0] > 0.0);
    CHECK(2.0 * std::acos(back[0]) == doctest::Approx(w).epsilon(1e-8));
  }
  CHECK_THROWS_AS(rotmat_to_quat(rodrigues(std::numbers::pi, {0, 0, 1})), AmbiguousRepresentative);
}

TEST_CASE("Hamilton product is a homomorphism") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ang(0.0, std::numbers::pi);
  for (int i = 0; i < 300; ++i) {
    const auto a = axisangle_to_quat({ang(rng), random_axis(rng)});
    const auto b = axisangle_to_quat({ang(rng), random_axis(rng)});
    CHECK(max_abs_diff(quat_to_rotmat(a * b), quat_to_rotmat(a) * quat_to_rotmat(b)) < 1e-10);
  }
  // i * j = k
  const UnitQuaternion i(0, 1, 0, 0), j(0, 0, 1, 0);
  const auto k = i * j;
  CHECK(k[3] == 1.0);
}

TEST_CASE("sphere geometry") {
  const auto p0 = SpherePoint::north_pole(4);
  const SpherePoint e2({0, 1, 0, 0});
  const SpherePoint south({-1, 0, 0, 0});
  CHECK(geodesic_dist(p0, p0) == 0.0);
  CHECK(geodesic_dist(p0, e2) == doctest::Approx(std::numbers::pi / 2));
  CHECK(geodesic_dist(p0, south) == doctest::Approx(std::numbers::pi));
  CHECK(in_cap(p0, 0.5));
  CHECK_FALSE(in_cap(e2, 0.5));
  CHECK(in_cap(SpherePoint({0.5, std::sqrt(0.75), 0, 0}), 0.5));
  CHECK_THROWS(in_cap(p0, 0.0));
  CHECK_THROWS(in_cap(p0, 1.0));
  CHECK(radial_coordinate(p0) == 0.0);
  CHECK(radial_coordinate(e2) == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS(radial_coordinate(south));
  CHECK_THROWS_AS(SpherePoint({1.0, 0.1}), RotationError);
}

TEST_CASE("exp map and cap/ball equivalence") {
  const auto p0 = SpherePoint::north_pole(4);
  const double zero[] = {0, 0, 0, 0};
  const auto same = exp_map(p0, zero);
  for (int i = 0; i < 4; ++i) CHECK(same[i] == p0[i]);
  const double quarter[] = {0, std::numbers::pi / 2, 0, 0};
  CHECK(std::abs(exp_map(p0, quarter)[0]) < 1e-15);
  const double bad[] = {0.1, 0.2, 0, 0};
  CHECK_THROWS(exp_map(p0, bad));

  std::mt19937_64 rng(33);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ur(0.05, 0.95);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> b(4);
    for (auto& x : b) x = nd(rng);
    double nb = 0.0;
    for (double x : b) nb += x * x;
    for (auto& x : b) x /= std::sqrt(nb);
    const SpherePoint base(b);
    std::vector<double> v(4);
    for (auto& x : v) x = nd(rng);
    double dot = 0.0;
    for (int k = 0; k < 4; ++k) dot += v[k] * b[k];
    for (int k = 0; k < 4; ++k) v[k] -= dot * b[k];
    double nv = 0.0;
    for (double x : v) nv += x * x;
    const double len = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    for (auto& x : v) x *= len / std::sqrt(nv);
    const auto p = exp_map(base, v);
    CHECK(geodesic_dist(base, p) == doctest::Approx(len).epsilon(1e-9));
    if (p[0] > -1.0 + 1e-9) {
      const double r = ur(rng);
      CHECK(in_cap(p, r) == (radial_coordinate(p) <= std::acos(r)));
    }
  }
}
