//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmdock/complex.hpp"

namespace fmdock {

struct ToyConfig {
  int min_atoms = 6;
  int max_atoms = 20;
  int max_rotatable = 4;
  double ring_probability = 0.35;
  double bond_length = 1.5;          // Angstrom
  double min_nonbonded = 3.0;        // pairs > 2 bonds apart, Angstrom
  double shell_gap = 3.8;            // shell radius - ligand radius
  double residue_spacing = 3.8;      // shell point spacing
  double aperture_deg = 30.0;        // half-angle of the opening
  int min_residues = 30;
  int max_residues = 200;
  double box = 20.0;                 // native centroid ~ U[-box, box]^3
  int retry_cap = 1000;
};

/// Synthetic complex. Every ligand atom has a distinct refinement color
/// and one anchor residue carrying that color as its label, placed on a
/// spherical shell in the direction of the atom; the rest of the shell is
/// unlabeled, with a cap removed as the aperture. The native pose is the
/// unique pose putting each atom in line with its anchor.
struct SyntheticComplex {
  ComplexRecord record;
  Vec3 native_center = Vec3::Zero();
  double shell_radius = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in (seed, index). Throws DataError when the retry cap is
/// exceeded.
SyntheticComplex generate_complex(std::uint64_t seed, int index,
                                  const ToyConfig &cfg = {});

/// Complexes with indices [first, first + n). Failed complexes are skipped
/// and reported in `warnings`.
std::vector<SyntheticComplex>
generate_corpus(std::uint64_t seed, int first, int n,
                const ToyConfig &cfg = {},
                std::vector<std::string> *warnings = nullptr);

/// Native coordinates displaced by `distance` along a random direction and
/// rotated by up to `max_angle` about the centroid.
Coords make_decoy(const SyntheticComplex &c, double distance, double max_angle,
                  std::uint64_t seed);

/// Mean cosine between each atom's offset from the cavity center and the
/// direction of its label-matched anchor residue. Equals 1 at the native
/// pose; atoms without an anchor are skipped.
double anchor_alignment(const ComplexRecord &rec, const Coords &coords);

}  // namespace fmdock
