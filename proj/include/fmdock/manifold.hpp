//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>

#include "fmdock/common.hpp"
#include "fmdock/rng.hpp"

namespace fmdock {

/// Element of so(3) as the 3-vector (k_x, k_y, k_z) of the skew matrix
///
///   [  0   -k_z  k_y ]
///   [ k_z   0   -k_x ]
///   [ -k_y  k_x   0  ]
///
/// Velocities are body-frame: Rdot = R * skew(k).
struct TangentSO3 {
  Vec3 k = Vec3::Zero();

  TangentSO3() = default;
  explicit TangentSO3(const Vec3 &v): k(v) { }
  TangentSO3(double x, double y, double z): k(x, y, z) { }

  Mat3 skew() const;
};

Mat3 skew(const Vec3 &k);
Vec3 unskew(const Mat3 &s);

/// Unit quaternion rotation (w, x, y, z). Every constructor and operation
/// renormalizes, so norm() == 1 to rounding.
class Rotation3 {
public:
  Rotation3() = default;

  static Rotation3 identity() { return Rotation3(); }
  static Rotation3 from_quaternion(double w, double x, double y, double z);
  static Rotation3 from_axis_angle(const Vec3 &axis, double angle);
  static Rotation3 from_matrix(const Mat3 &m);
  /// exp map from the rotation vector (axis * angle).
  static Rotation3 exp(const Vec3 &rotvec);

  /// Rotation vector with norm in [0, pi]. At exactly pi the sign is chosen
  /// so that the first non-zero component is positive.
  Vec3 log() const;

  Mat3 matrix() const;
  Rotation3 inverse() const;
  Rotation3 operator*(const Rotation3 &o) const;
  Vec3 rotate(const Vec3 &v) const;
  Coords rotate(const Coords &x) const;

  /// Rotation angle in [0, pi].
  double angle() const;

  double w() const { return q_[0]; }
  double x() const { return q_[1]; }
  double y() const { return q_[2]; }
  double z() const { return q_[3]; }
  const std::array<double, 4> &quaternion() const { return q_; }
  double quaternion_norm() const;

  /// |<q1, q2>|, equal to 1 for the same rotation.
  double abs_dot(const Rotation3 &o) const;
  /// Frobenius distance of the rotation matrices.
  double matrix_distance(const Rotation3 &o) const;
  /// Geodesic angle between the two rotations, in [0, pi].
  double angle_to(const Rotation3 &o) const;

private:
  std::array<double, 4> q_ = { 1.0, 0.0, 0.0, 0.0 };
};

// ---- SO(3) geodesics ------------------------------------------------------

/// Shortest-path geodesic r0 * exp(t * log(r0^-1 r1)).
Rotation3 slerp_so3(const Rotation3 &r0, const Rotation3 &r1, double t);

/// Constant body-frame velocity of slerp_so3(r0, r1, .): R(t)^T Rdot(t).
TangentSO3 geodesic_velocity_so3(const Rotation3 &r0, const Rotation3 &r1);

// ---- SO(2) torsions -------------------------------------------------------

/// Wrapped representative of theta modulo period, in (-p/2, p/2].
double wrap_angle(double theta, double period);

struct Torsion {
  double theta = 0.0;
  double period = kTwoPi;

  Torsion() = default;
  /// Wraps theta; period must be positive.
  Torsion(double theta, double period);
};

/// wrap(t1 - t0), the signed shortest rotation from t0 to t1.
double torsion_delta(const Torsion &t0, const Torsion &t1);
Torsion slerp_torsion(const Torsion &t0, const Torsion &t1, double t);

// ---- sampling -------------------------------------------------------------

Rotation3 sample_rotation_uniform(Rng &rng);
/// center * exp(skew(k)), k ~ N(0, sigma^2 I)
Rotation3 sample_rotation_gaussian(Rng &rng, const Rotation3 &center,
                                   double sigma);
Torsion sample_torsion_uniform(Rng &rng, double period);
Torsion sample_torsion_gaussian(Rng &rng, const Torsion &center, double sigma);

// ---- canonical metric g(X, Y) = tr(X^T Y) ----------------------------------

double canonical_norm(const TangentSO3 &k);
/// Norm of the so(2) element with angular rate delta.
double canonical_norm_so2(double delta);
double canonical_norm(const Vec3 &v);

}  // namespace fmdock
