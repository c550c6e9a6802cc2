//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "fmdock/common.hpp"

namespace fmdock {

struct Residue {
  std::string chain;
  int number = 0;
  std::string name;
  Vec3 ca = Vec3::Zero();
  // Heavy atoms, including CA.
  std::vector<std::string> atom_names;
  std::vector<std::string> elements;
  Coords atoms;
  // Complementarity class used by the synthetic complexes: the ligand atom
  // color this residue contacts, or -1.
  int label = -1;
};

/// Rigid receptor; each residue has exactly one CA.
struct ProteinStructure {
  std::vector<Residue> residues;

  int num_residues() const { return static_cast<int>(residues.size()); }
  /// Chain ids in first-appearance order.
  std::vector<std::string> chains() const;
  Coords ca_coords() const;
  Coords heavy_atoms() const;
  std::vector<std::string> heavy_elements() const;
  std::vector<int> labels() const;
  Vec3 ca_centroid() const;

  /// Copy with every residue transformed by x -> r x + t.
  ProteinStructure transformed(const Mat3 &r, const Vec3 &t) const;
};

}  // namespace fmdock
