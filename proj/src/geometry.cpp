//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace fmdock {

Mat3 kabsch_rotation(const Coords &p, const Coords &q,
                     std::span<const double> weights) {
  if (p.cols() != q.cols())
    throw DataError("kabsch: point count mismatch");
  Mat3 cov = Mat3::Zero();
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    double w = weights.empty() ? 1.0 : weights[i];
    cov += w * q.col(i) * p.col(i).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((u * v.transpose()).determinant() < 0.0)
    d(2, 2) = -1.0;
  return u * d * v.transpose();
}

RigidTransform kabsch_superpose(const Coords &mobile, const Coords &target) {
  if (mobile.cols() != target.cols() || mobile.cols() == 0)
    throw DataError("kabsch_superpose: need equal, non-empty point sets");
  Vec3 cm = centroid(mobile), ct = centroid(target);
  Mat3 r = kabsch_rotation(mobile.colwise() - cm, target.colwise() - ct);
  return { r, ct - r * cm };
}

Vec3 fit_sphere_center(const Coords &points) {
  // |x|^2 = 2 c.x + (r^2 - |c|^2) is linear in (c, k).
  const Eigen::Index n = points.cols();
  if (n < 4)
    return centroid(points);
  Vec3 shift = centroid(points);
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec3 x = points.col(i) - shift;
    a.row(i) << 2.0 * x.x(), 2.0 * x.y(), 2.0 * x.z(), 1.0;
    b(i) = x.squaredNorm();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 4)
    return shift;
  Eigen::Vector4d sol = qr.solve(b);
  return shift + sol.head<3>();
}

double dihedral(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2,
                const Vec3 &p3) {
  Vec3 b1 = p1 - p0, b2 = p2 - p1, b3 = p3 - p2;
  Vec3 n1 = b1.cross(b2), n2 = b2.cross(b3);
  double y = n1.cross(n2).dot(b2.normalized());
  double x = n1.dot(n2);
  return std::atan2(y, x);
}

void rotate_about_axis(Coords &x, std::span<const int> atoms,
                       const Vec3 &origin, const Vec3 &axis, double angle) {
  Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  for (int i: atoms)
    x.col(i) = r * (x.col(i) - origin) + origin;
}

}  // namespace fmdock
