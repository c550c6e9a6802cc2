//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmdock/filters.hpp"
#include "fmdock/ligand.hpp"
#include "fmdock/protein.hpp"

namespace fmdock {

inline constexpr int kSchemaVersion = 1;

/// One docking problem. Coordinates in Angstrom.
struct ComplexRecord {
  std::string id;
  ProteinStructure protein;
  // Conformer poses are applied to (not necessarily the native one).
  LigandConformer ligand;
  // Same atom order as `ligand`.
  std::optional<Coords> native;
  std::optional<Vec3> pocket_center;
  std::map<std::string, std::string> metadata;

  /// `ligand` topology at the native coordinates; throws DataError when
  /// absent.
  LigandConformer native_conformer() const;
};

struct PoseEntry {
  Coords coords;
  PoseTransform pose;
  std::optional<ValidityReport> report;
  std::optional<double> score;
};

/// Candidate poses for one complex; every entry uses the atom order of the
/// complex's conformer.
struct PoseSet {
  std::string complex_id;
  std::vector<PoseEntry> poses;
  std::string config_hash;
  std::uint64_t seed = 0;
  // Filled by `filter` and `rank`.
  std::optional<std::vector<int>> retained;
  std::optional<int> selected;
  // Set when sampling failed; such a set has no poses and scores RMSD +inf.
  std::optional<std::string> error;
};

}  // namespace fmdock
