//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "fmdock/common.hpp"
#include "fmdock/graph.hpp"
#include "fmdock/manifold.hpp"

namespace fmdock {

/// Version tag of the rotatable-bond rule, recorded in output metadata.
inline constexpr const char *kRotatableRuleVersion = "graph-bridge-v1";

struct RotatableBond {
  // Axis a -> b; `moving` is the component containing b once (a, b) is cut.
  int a = 0;
  int b = 0;
  std::vector<int> moving;
  double period = kTwoPi;
};

/// Single-order bridges between atoms of degree >= 2, not flagged amide.
/// Each bond is oriented so that its moving side does not contain the
/// graph center; moving sets are therefore nested or disjoint and the
/// torsion rotations commute. Periods come from rotational automorphisms
/// of the moving side about the axis (3-fold, then 2-fold, else 2 pi).
/// Sorted by (a, b).
std::vector<RotatableBond> detect_rotatable_bonds(const MolGraph &graph);

/// Heavy-atom ligand conformer. Immutable after construction.
class LigandConformer {
public:
  LigandConformer() = default;
  /// Throws DataError for a disconnected graph or mismatched sizes.
  LigandConformer(std::vector<std::string> elements, Coords coords,
                  std::vector<Bond> bonds);

  int size() const { return graph_.size(); }
  int num_torsions() const { return static_cast<int>(rotatable_.size()); }
  const std::vector<std::string> &elements() const { return graph_.elements(); }
  const Coords &coords() const { return coords_; }
  const MolGraph &graph() const { return graph_; }
  const std::vector<Bond> &bonds() const { return graph_.bonds(); }
  const std::vector<RotatableBond> &rotatable_bonds() const {
    return rotatable_;
  }
  /// Non-fatal issues found at construction (e.g. atom count outside the
  /// 6-150 range used for training data).
  const std::vector<std::string> &warnings() const { return warnings_; }

  /// Same topology, new coordinates.
  LigandConformer with_coords(Coords coords) const;
  /// Same topology, coordinates translated so the centroid is at origin.
  LigandConformer centered() const;

private:
  MolGraph graph_;
  Coords coords_;
  std::vector<RotatableBond> rotatable_;
  std::vector<std::string> warnings_;
};

/// Ligand pose relative to a conformer: torsions first, then rotation
/// about the centroid, then translation so that the final centroid is
/// centroid(conformer) + tr.
struct PoseTransform {
  Vec3 tr = Vec3::Zero();
  Rotation3 rot;
  std::vector<Torsion> tor;

  static PoseTransform identity(const LigandConformer &lig);
};

/// Torsion-only change of conformation; result has the same centroid
/// convention as the input (not recentered).
Coords apply_torsions(const LigandConformer &lig, const Coords &coords,
                      const std::vector<Torsion> &tor);

Coords apply_pose(const LigandConformer &lig, const PoseTransform &pose);

/// Torsion changes from `lig` to `target` measured per rotatable bond.
std::vector<Torsion> measure_torsion_change(const LigandConformer &lig,
                                            const Coords &target);

/// For target = apply_pose(lig, P), returns P^-1: the transform that,
/// applied to the target conformation, gives back lig.coords().
/// tr = centroid(lig) - centroid(target), rot = R^-1, tor = -tau.
PoseTransform relative_pose(const LigandConformer &lig, const Coords &target);

/// The forward transform P itself (so apply_pose(lig, P) == target).
PoseTransform forward_pose(const LigandConformer &lig, const Coords &target);

}  // namespace fmdock
