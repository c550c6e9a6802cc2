//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fmdock/filters.hpp"
#include "fmdock/geometry.hpp"
#include "fmdock/graph.hpp"
#include "fmdock/protein.hpp"

namespace fmdock {

struct RmsdResult {
  double value = 0.0;  // Angstrom, may be +inf
  // pred atom perm[i] is compared with ref atom i.
  std::vector<int> automorphism;
  bool aligned = false;
  // Automorphism cap hit; value uses the identity permutation.
  bool truncated = false;
};

/// Minimum RMSD over graph automorphisms, in the shared frame (no fit).
RmsdResult symmetry_rmsd(const Coords &pred, const Coords &ref,
                         const MolGraph &graph,
                         std::size_t cap = 1'000'000);

struct AlignOptions {
  double pocket_radius = 10.0;   // Angstrom
  int refinement_cycles = 5;
  double outlier_factor = 2.0;   // drop residuals > factor * RMS
};

struct AlignResult {
  // Maps reference coordinates into the predicted frame.
  RigidTransform transform;
  double rmsd = 0.0;  // over the pairs kept in the final cycle
  int pairs = 0;
  std::string chain;  // reference primary chain (base) or predicted chain
};

/// Reference pocket (primary-chain CA within the radius of the reference
/// ligand) superposed onto the whole predicted protein, matched by
/// (chain, residue number), with outlier-rejection cycles. Throws DataError
/// when fewer than 3 pairs match.
AlignResult pocket_align_base(const ProteinStructure &ref,
                              const Coords &ref_ligand,
                              const ProteinStructure &pred,
                              const AlignOptions &opt = {});

/// Reference pocket superposed onto the predicted pocket (CA within the
/// radius of the predicted ligand) chain by chain, matched by residue
/// number; no refinement; the chain with the lowest RMSD wins.
AlignResult pocket_align_pocketbased(const ProteinStructure &ref,
                                     const Coords &ref_ligand,
                                     const ProteinStructure &pred,
                                     const Coords &pred_ligand,
                                     const AlignOptions &opt = {});

struct SuccessRates {
  double rmsd_2a = 0.0;
  double rmsd_2a_valid = 0.0;
  int n = 0;
};

/// +inf counts as failure; `reports` may be empty (validity unknown, the
/// second rate is then 0).
SuccessRates success_rates(std::span<const double> rmsd,
                           std::span<const ValidityReport> reports,
                           double threshold = 2.0);

}  // namespace fmdock
