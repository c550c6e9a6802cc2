//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/protein.hpp"

#include <algorithm>

namespace fmdock {

std::vector<std::string> ProteinStructure::chains() const {
  std::vector<std::string> out;
  for (const auto &r: residues)
    if (std::find(out.begin(), out.end(), r.chain) == out.end())
      out.push_back(r.chain);
  return out;
}

Coords ProteinStructure::ca_coords() const {
  Coords out(3, num_residues());
  for (int i = 0; i < num_residues(); ++i)
    out.col(i) = residues[i].ca;
  return out;
}

Coords ProteinStructure::heavy_atoms() const {
  Eigen::Index n = 0;
  for (const auto &r: residues)
    n += r.atoms.cols();
  Coords out(3, n);
  Eigen::Index k = 0;
  for (const auto &r: residues) {
    out.middleCols(k, r.atoms.cols()) = r.atoms;
    k += r.atoms.cols();
  }
  return out;
}

std::vector<std::string> ProteinStructure::heavy_elements() const {
  std::vector<std::string> out;
  for (const auto &r: residues)
    out.insert(out.end(), r.elements.begin(), r.elements.end());
  return out;
}

std::vector<int> ProteinStructure::labels() const {
  std::vector<int> out;
  out.reserve(residues.size());
  for (const auto &r: residues)
    out.push_back(r.label);
  return out;
}

Vec3 ProteinStructure::ca_centroid() const {
  return centroid(ca_coords());
}

ProteinStructure ProteinStructure::transformed(const Mat3 &r,
                                               const Vec3 &t) const {
  ProteinStructure out = *this;
  for (auto &res: out.residues) {
    res.ca = r * res.ca + t;
    res.atoms = (r * res.atoms).colwise() + t;
  }
  return out;
}

}  // namespace fmdock
