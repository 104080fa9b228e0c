#include "kwc/rotrep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace kwc::rotrep {

namespace {

// Below this hemisphere coordinate the rotation angle is pi up to rounding.
constexpr double kEquatorTol = 1e-10;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z, double tol)
    : q_{w, x, y, z} {
  const double n = norm(q_);
  if (!std::isfinite(n) || std::abs(n - 1.0) > tol) {
    throw RotationError("quaternion is not unit (|q| = " + std::to_string(n) + ")");
  }
}

UnitQuaternion UnitQuaternion::negated() const { return {-q_[0], -q_[1], -q_[2], -q_[3]}; }

UnitQuaternion UnitQuaternion::conjugate() const { return {q_[0], -q_[1], -q_[2], -q_[3]}; }

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  std::array<double, 4> r{
      a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
      a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
      a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
      a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
  };
  const double n = norm(r);
  return {r[0] / n, r[1] / n, r[2] / n, r[3] / n};
}

void validate(const AxisAngle& aa) {
  if (!(aa.angle >= 0.0 && aa.angle <= std::numbers::pi)) {
    throw RotationError("rotation angle must lie in [0, pi]");
  }
  if (std::abs(norm(aa.axis) - 1.0) > kUnitTol) throw RotationError("rotation axis is not a unit vector");
}

RotationMatrix::RotationMatrix(const std::array<double, 9>& rowmajor) : m_(rowmajor) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m_[3 * k + i] * m_[3 * k + j];
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > kRotationTol) {
        throw RotationError("matrix is not orthogonal");
      }
    }
  }
  const double det = m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
                     m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
  if (std::abs(det - 1.0) > kRotationTol) throw RotationError("matrix determinant is not +1");
}

RotationMatrix RotationMatrix::identity() { return RotationMatrix({1, 0, 0, 0, 1, 0, 0, 0, 1}); }

std::array<double, 3> RotationMatrix::apply(const std::array<double, 3>& v) const {
  std::array<double, 3> out{};
  for (int r = 0; r < 3; ++r) out[r] = m_[3 * r] * v[0] + m_[3 * r + 1] * v[1] + m_[3 * r + 2] * v[2];
  return out;
}

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[3 * i + j] += a(i, k) * b(k, j);
  return RotationMatrix(out);
}

double max_abs_diff(const RotationMatrix& a, const RotationMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < 9; ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

UnitQuaternion axisangle_to_quat(const AxisAngle& aa) {
  validate(aa);
  // w in [0, pi] gives cos(w/2) >= 0 directly.
  const double c = std::cos(0.5 * aa.angle);
  const double s = std::sin(0.5 * aa.angle);
  return {c, s * aa.axis[0], s * aa.axis[1], s * aa.axis[2]};
}

RotationMatrix quat_to_rotmat(const UnitQuaternion& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return RotationMatrix({
      1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
  });
}

UnitQuaternion rotmat_to_quat(const RotationMatrix& r) {
  // Shepperd: take the largest of 4 q_i^2 candidates for stability.
  const double t = r.trace();
  const std::array<double, 4> cand{1 + t, 1 + 2 * r(0, 0) - t, 1 + 2 * r(1, 1) - t, 1 + 2 * r(2, 2) - t};
  const auto big = static_cast<int>(std::max_element(cand.begin(), cand.end()) - cand.begin());
  const double s = 2.0 * std::sqrt(cand[big]);  // 4 |q_big|
  std::array<double, 4> q{};
  switch (big) {
    case 0:
      q = {s / 4, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
      break;
    case 1:
      q = {(r(2, 1) - r(1, 2)) / s, s / 4, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
      break;
    case 2:
      q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, s / 4, (r(1, 2) + r(2, 1)) / s};
      break;
    default:
      q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, s / 4};
      break;
  }
  if (std::abs(q[0]) <= kEquatorTol) {
    throw AmbiguousRepresentative("rotation angle is pi: q and -q both lie on the equator q0 = 0");
  }
  if (q[0] < 0) {
    for (double& c : q) c = -c;
  }
  const double n = norm(q);
  return {q[0] / n, q[1] / n, q[2] / n, q[3] / n};
}

SpherePoint::SpherePoint(std::vector<double> p, double tol) : p_(std::move(p)) {
  if (p_.size() < 2) throw RotationError("sphere point needs dimension >= 2");
  const double n = norm(p_);
  if (!std::isfinite(n) || std::abs(n - 1.0) > tol) {
    throw RotationError("sphere point is not unit (|p| = " + std::to_string(n) + ")");
  }
}

SpherePoint SpherePoint::north_pole(int M) {
  std::vector<double> p(static_cast<std::size_t>(M), 0.0);
  p.at(0) = 1.0;
  return SpherePoint(std::move(p));
}

double geodesic_dist(const SpherePoint& p, const SpherePoint& q) {
  if (p.dim() != q.dim()) throw RotationError("sphere points of different dimension");
  return std::acos(std::clamp(dot(p.coords(), q.coords()), -1.0, 1.0));
}

bool in_cap(const SpherePoint& p, double r) {
  if (!(r > 0.0 && r < 1.0)) throw RotationError("cap parameter r must lie in (0, 1)");
  return p[0] >= r;
}

double radial_coordinate(const SpherePoint& p) {
  if (p[0] <= -1.0 + kUnitTol) throw RotationError("radial coordinate undefined at the antipode of p0");
  return std::acos(std::clamp(p[0], -1.0, 1.0));
}

SpherePoint exp_map(const SpherePoint& base, std::span<const double> v) {
  if (static_cast<int>(v.size()) != base.dim()) throw RotationError("tangent vector of wrong dimension");
  if (std::abs(dot(base.coords(), v)) > kRotationTol) throw RotationError("vector is not tangent at base");
  const double len = norm(v);
  if (len >= std::numbers::pi) throw RotationError("tangent vector length must be < pi");
  std::vector<double> out(base.coords().begin(), base.coords().end());
  if (len == 0.0) return SpherePoint(std::move(out));
  const double c = std::cos(len);
  const double s = std::sin(len) / len;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * out[i] + s * v[i];
  const double n = norm(out);
  for (double& x : out) x /= n;
  return SpherePoint(std::move(out));
}

}  // namespace kwc::rotrep
