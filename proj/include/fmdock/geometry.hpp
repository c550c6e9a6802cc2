//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>

#include "fmdock/common.hpp"

namespace fmdock {

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3 &p) const { return rotation * p + translation; }
  Coords apply(const Coords &x) const {
    return (rotation * x).colwise() + translation;
  }
  RigidTransform inverse() const {
    return { rotation.transpose(), -(rotation.transpose() * translation) };
  }
};

/// Proper rotation (det = +1) R minimizing sum_i w_i |R p_i - q_i|^2 for
/// already-centered point sets. Empty weights means uniform.
Mat3 kabsch_rotation(const Coords &p, const Coords &q,
                     std::span<const double> weights = {});

/// Least-squares superposition of `mobile` onto `target`:
/// argmin_T sum |T(mobile_i) - target_i|^2.
RigidTransform kabsch_superpose(const Coords &mobile, const Coords &target);

/// Algebraic least-squares sphere fit; returns the center. Needs at least
/// four non-coplanar points, otherwise returns the centroid.
Vec3 fit_sphere_center(const Coords &points);

/// Dihedral p0-p1-p2-p3 in (-pi, pi]. Positive when p3 is rotated
/// counter-clockwise about p1->p2 relative to p0.
double dihedral(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2,
                const Vec3 &p3);

/// Rotates the listed columns of x about the axis through `origin` along
/// unit vector `axis` by `angle` (right-hand rule).
void rotate_about_axis(Coords &x, std::span<const int> atoms,
                       const Vec3 &origin, const Vec3 &axis, double angle);

}  // namespace fmdock
