#pragma once

// SO(3) through unit quaternions, and the sphere geometry used by the
// orientation field: geodesic distance, spherical caps around the north pole
// p0 = (1, 0, ..., 0), and the exponential map.
//
// Quaternions are (w, x, y, z) with Hamilton product (right-handed,
// i*j = k). q and -q give the same rotation; the hemisphere representative has
// q0 >= 0.

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace kwc::rotrep {

class RotationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The hemisphere lift of a rotation by exactly pi is not unique.
class AmbiguousRepresentative : public RotationError {
 public:
  using RotationError::RotationError;
};

inline constexpr double kUnitTol = 1e-12;
inline constexpr double kRotationTol = 1e-10;

class UnitQuaternion {
 public:
  /// Throws RotationError if |q| differs from 1 by more than `tol`.
  UnitQuaternion(double w, double x, double y, double z, double tol = kUnitTol);
  static UnitQuaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  const std::array<double, 4>& coeffs() const { return q_; }
  double operator[](std::size_t i) const { return q_[i]; }
  UnitQuaternion negated() const;
  UnitQuaternion conjugate() const;

 private:
  std::array<double, 4> q_;
};

/// Hamilton product, renormalised against rounding drift.
UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);

struct AxisAngle {
  double angle;               // [0, pi]
  std::array<double, 3> axis; // unit
};

/// Validates |axis| = 1 and angle in [0, pi].
void validate(const AxisAngle& aa);

class RotationMatrix {
 public:
  explicit RotationMatrix(const std::array<double, 9>& rowmajor);
  static RotationMatrix identity();

  double operator()(int r, int c) const { return m_[3 * r + c]; }
  const std::array<double, 9>& data() const { return m_; }
  std::array<double, 3> apply(const std::array<double, 3>& v) const;
  double trace() const { return m_[0] + m_[4] + m_[8]; }

 private:
  std::array<double, 9> m_;
};

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b);
double max_abs_diff(const RotationMatrix& a, const RotationMatrix& b);

UnitQuaternion axisangle_to_quat(const AxisAngle& aa);
RotationMatrix quat_to_rotmat(const UnitQuaternion& q);
/// Throws AmbiguousRepresentative when the rotation angle is pi.
UnitQuaternion rotmat_to_quat(const RotationMatrix& r);

/// Unit vector in R^M, M >= 2.
class SpherePoint {
 public:
  explicit SpherePoint(std::vector<double> p, double tol = kUnitTol);
  static SpherePoint north_pole(int M);

  int dim() const { return static_cast<int>(p_.size()); }
  std::span<const double> coords() const { return p_; }
  double operator[](std::size_t i) const { return p_[i]; }

 private:
  std::vector<double> p_;
};

double geodesic_dist(const SpherePoint& p, const SpherePoint& q);
/// True iff the first coordinate is >= r (closed cap). r must lie in (0, 1).
bool in_cap(const SpherePoint& p, double r);
/// Geodesic distance to the north pole; rejects the antipode.
double radial_coordinate(const SpherePoint& p);
/// cos|v| base + sin|v| v/|v| for a tangent vector v at base, |v| < pi.
SpherePoint exp_map(const SpherePoint& base, std::span<const double> v);

}  // namespace kwc::rotrep
