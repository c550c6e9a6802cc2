//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fmdock {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// One column per atom, in Angstrom.
using Coords = Eigen::Matrix3Xd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Malformed or inconsistent input data. Maps to CLI exit code 2.
class DataError: public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// NaN / divergence during training or integration. Maps to exit code 3.
class NumericError: public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline Vec3 centroid(const Coords &x) {
  if (x.cols() == 0)
    return Vec3::Zero();
  return x.rowwise().mean();
}

inline double rmsd_no_fit(const Coords &a, const Coords &b) {
  if (a.cols() != b.cols())
    throw DataError("rmsd: atom count mismatch");
  if (a.cols() == 0)
    return 0.0;
  return std::sqrt((a - b).colwise().squaredNorm().sum()
                   / static_cast<double>(a.cols()));
}

}  // namespace fmdock
