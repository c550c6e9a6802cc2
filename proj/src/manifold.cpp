//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fmdock {

namespace {
constexpr double kSmallAngle = 1e-7;

std::array<double, 4> normalized(std::array<double, 4> q) {
  double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(n > 0.0) || !std::isfinite(n))
    throw NumericError("rotation: quaternion has zero or non-finite norm");
  // Already unit to rounding: leave the bits alone so serialization
  // round-trips exactly.
  if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon())
    return q;
  for (double &c: q)
    c /= n;
  return q;
}
}  // namespace

Mat3 skew(const Vec3 &k) {
  Mat3 s;
  s << 0.0, -k.z(), k.y(),  //
      k.z(), 0.0, -k.x(),   //
      -k.y(), k.x(), 0.0;
  return s;
}

Vec3 unskew(const Mat3 &s) {
  return Vec3(0.5 * (s(2, 1) - s(1, 2)), 0.5 * (s(0, 2) - s(2, 0)),
              0.5 * (s(1, 0) - s(0, 1)));
}

Mat3 TangentSO3::skew() const {
  return fmdock::skew(k);
}

Rotation3 Rotation3::from_quaternion(double w, double x, double y, double z) {
  Rotation3 r;
  r.q_ = normalized({ w, x, y, z });
  return r;
}

Rotation3 Rotation3::from_axis_angle(const Vec3 &axis, double angle) {
  double n = axis.norm();
  if (n == 0.0)
    return identity();
  return exp(axis / n * angle);
}

Rotation3 Rotation3::from_matrix(const Mat3 &m) {
  // Shepperd: pick the largest of the four diagonal combinations.
  double tr = m.trace();
  std::array<double, 4> q;
  if (tr >= m(0, 0) && tr >= m(1, 1) && tr >= m(2, 2)) {
    double s = std::sqrt(1.0 + tr) * 2.0;
    q = { 0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s,
          (m(1, 0) - m(0, 1)) / s };
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
    q = { (m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s,
          (m(0, 2) + m(2, 0)) / s };
  } else if (m(1, 1) >= m(2, 2)) {
    double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
    q = { (m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s,
          (m(1, 2) + m(2, 1)) / s };
  } else {
    double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
    q = { (m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s,
          (m(1, 2) + m(2, 1)) / s, 0.25 * s };
  }
  Rotation3 r;
  r.q_ = normalized(q);
  return r;
}

Rotation3 Rotation3::exp(const Vec3 &rotvec) {
  double theta = rotvec.norm();
  Rotation3 r;
  if (theta < kSmallAngle) {
    double th2 = theta * theta;
    double c = 1.0 - th2 / 8.0;
    double s = 0.5 * (1.0 - th2 / 24.0);
    r.q_ = normalized({ c, s * rotvec.x(), s * rotvec.y(), s * rotvec.z() });
  } else {
    double half = 0.5 * theta;
    double s = std::sin(half) / theta;
    r.q_ = normalized(
        { std::cos(half), s * rotvec.x(), s * rotvec.y(), s * rotvec.z() });
  }
  return r;
}

Vec3 Rotation3::log() const {
  double w = q_[0];
  Vec3 v(q_[1], q_[2], q_[3]);
  if (w < 0.0) {
    w = -w;
    v = -v;
  }
  double s = v.norm();
  if (s == 0.0)
    return Vec3::Zero();

  if (w <= 1e-15) {
    // Rotation by pi: +axis and -axis are equally short.
    for (int i = 0; i < 3; ++i) {
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0.0)
          v = -v;
        break;
      }
    }
    return v / s * kPi;
  }

  if (s < 0.5 * kSmallAngle) {
    double ratio = s / w;
    return v * (2.0 / w) * (1.0 - ratio * ratio / 3.0);
  }
  double theta = 2.0 * std::atan2(s, w);
  return v * (theta / s);
}

Mat3 Rotation3::matrix() const {
  const auto [w, x, y, z] = q_;
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Rotation3 Rotation3::inverse() const {
  Rotation3 r;
  r.q_ = { q_[0], -q_[1], -q_[2], -q_[3] };
  return r;
}

Rotation3 Rotation3::operator*(const Rotation3 &o) const {
  const auto [w1, x1, y1, z1] = q_;
  const auto [w2, x2, y2, z2] = o.q_;
  Rotation3 r;
  r.q_ = normalized({ w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                      w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                      w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                      w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2 });
  return r;
}

Vec3 Rotation3::rotate(const Vec3 &v) const {
  return matrix() * v;
}

Coords Rotation3::rotate(const Coords &x) const {
  return matrix() * x;
}

double Rotation3::angle() const {
  Vec3 v(q_[1], q_[2], q_[3]);
  return 2.0 * std::atan2(v.norm(), std::abs(q_[0]));
}

double Rotation3::quaternion_norm() const {
  return std::sqrt(q_[0] * q_[0] + q_[1] * q_[1] + q_[2] * q_[2]
                   + q_[3] * q_[3]);
}

double Rotation3::abs_dot(const Rotation3 &o) const {
  return std::abs(q_[0] * o.q_[0] + q_[1] * o.q_[1] + q_[2] * o.q_[2]
                  + q_[3] * o.q_[3]);
}

double Rotation3::matrix_distance(const Rotation3 &o) const {
  return (matrix() - o.matrix()).norm();
}

double Rotation3::angle_to(const Rotation3 &o) const {
  return (inverse() * o).angle();
}

Rotation3 slerp_so3(const Rotation3 &r0, const Rotation3 &r1, double t) {
  Vec3 k = (r0.inverse() * r1).log();
  return r0 * Rotation3::exp(t * k);
}

TangentSO3 geodesic_velocity_so3(const Rotation3 &r0, const Rotation3 &r1) {
  return TangentSO3((r0.inverse() * r1).log());
}

double wrap_angle(double theta, double period) {
  if (!(period > 0.0))
    throw DataError("wrap_angle: period must be positive");
  double half = 0.5 * period;
  double r = theta - period * std::ceil((theta - half) / period);
  // Guard the half-open interval against rounding at the edges.
  if (r <= -half)
    r += period;
  else if (r > half)
    r -= period;
  return r;
}

Torsion::Torsion(double th, double p) {
  if (!(p > 0.0))
    throw DataError("torsion period must be positive");
  period = p;
  theta = wrap_angle(th, p);
}

double torsion_delta(const Torsion &t0, const Torsion &t1) {
  if (t0.period != t1.period)
    throw DataError("torsion_delta: mismatched torsion periods");
  return wrap_angle(t1.theta - t0.theta, t0.period);
}

Torsion slerp_torsion(const Torsion &t0, const Torsion &t1, double t) {
  double delta = torsion_delta(t0, t1);
  return Torsion(t0.theta + t * delta, t0.period);
}

Rotation3 sample_rotation_uniform(Rng &rng) {
  // A normalized 4D Gaussian is Haar-uniform on SO(3).
  for (;;) {
    double w = rng.normal(), x = rng.normal(), y = rng.normal(),
           z = rng.normal();
    if (w * w + x * x + y * y + z * z > 1e-12)
      return Rotation3::from_quaternion(w, x, y, z);
  }
}

Rotation3 sample_rotation_gaussian(Rng &rng, const Rotation3 &center,
                                   double sigma) {
  return center * Rotation3::exp(rng.normal3(sigma));
}

Torsion sample_torsion_uniform(Rng &rng, double period) {
  // (-p/2, p/2]
  double u = 1.0 - rng.uniform();
  return Torsion(period * (u - 0.5), period);
}

Torsion sample_torsion_gaussian(Rng &rng, const Torsion &center,
                                double sigma) {
  return Torsion(center.theta + rng.normal(0.0, sigma), center.period);
}

double canonical_norm(const TangentSO3 &k) {
  return std::sqrt(2.0 * k.k.squaredNorm());
}

double canonical_norm_so2(double delta) {
  return std::sqrt(2.0) * std::abs(delta);
}

double canonical_norm(const Vec3 &v) {
  return v.norm();
}

}  // namespace fmdock
