//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <vector>

#include "fmdock/ligand.hpp"
#include "fmdock/protein.hpp"
#include "fmdock/rng.hpp"

namespace fmdock {

/// Noise schedule of one coarse-to-fine stage.
///   stage 1: tr ~ N(protein center, sigma_large^2), rot/tor uniform
///   stage 2: tr ~ N(tr_true, sigma_medium^2),       rot/tor uniform
///   stage 3: tr ~ N(tr_true, sigma_small^2), rot/tor tangent-Gaussian
///            about the truth with sigma_small_angular
struct StageConfig {
  int stage = 1;
  double sigma_large = 15.0;         // Angstrom
  double sigma_medium = 5.0;         // Angstrom
  double sigma_small = 1.0;          // Angstrom
  double sigma_small_angular = 0.3;  // radian

  void validate() const;
};

struct AugmentConfig {
  bool enabled = true;
  bool random_rotation = true;
  double coord_noise = 0.25;  // Angstrom
  double mask_rate = 0.15;
};

struct LossWeights {
  double w_tr = 1.0;
  double w_rot = 1.0;
  double w_tor = 3.0;

  void validate() const;
};

/// Element of R^3 x so(3) x so(2)^m. rot is body-frame.
struct Velocity {
  Vec3 tr = Vec3::Zero();
  TangentSO3 rot;
  Eigen::VectorXd tor;

  static Velocity zero(int num_torsions);
};

struct FlowSample {
  PoseTransform x0;  // noise
  PoseTransform x1;  // data
  double t = 0.0;
  PoseTransform xt;
  Velocity target;
};

/// Linear for tr, SLERP for rot and each torsion.
PoseTransform interpolate(const PoseTransform &x0, const PoseTransform &x1,
                          double t);
/// Time derivative of interpolate(); constant along the path.
Velocity target_velocity(const PoseTransform &x0, const PoseTransform &x1);

/// Draws x0 for the stage around `truth`, t ~ U[0, 1] and builds the
/// interpolated pose and its velocity. `stage1_center` is the mean of the
/// stage-1 translation noise.
FlowSample sample_flow(const PoseTransform &truth, const StageConfig &cfg,
                       const Vec3 &stage1_center, Rng &rng);

struct Augmented {
  Coords protein;
  Coords ligand;
  std::vector<char> residue_keep;
  std::vector<char> atom_keep;
  Rotation3 rotation;
};

/// One uniform rotation of the whole complex about the protein centroid,
/// N(0, noise^2) per coordinate, Bernoulli(mask_rate) masking of residues
/// and ligand atoms.
Augmented augment(const Coords &protein, const Coords &ligand,
                  const AugmentConfig &cfg, Rng &rng);

/// Torsions stay supervised unless both axis atoms or the whole moving set
/// are masked.
std::vector<char> torsion_keep_mask(const LigandConformer &lig,
                                    std::span<const char> atom_keep);

struct TrainingExample {
  FlowSample sample;
  // Randomized, centered conformer the pose acts on.
  LigandConformer input;
  Coords protein_ca;
  std::vector<int> residue_labels;
  std::vector<char> residue_keep;
  std::vector<char> atom_keep;
  std::vector<char> torsion_keep;
};

/// One training tuple: augment, randomize the conformer, set the inverse
/// transform as the target, draw stage noise and t, interpolate.
TrainingExample make_training_sample(const LigandConformer &native,
                                     const ProteinStructure &protein,
                                     const StageConfig &cfg,
                                     const AugmentConfig &aug, Rng &rng);

struct LossTerms {
  double total = 0.0;
  double tr = 0.0;
  double rot = 0.0;
  double tor = 0.0;
};

/// w_tr |dv_tr|^2 + w_rot |dv_rot|^2 + w_tor sum_kept (dv_tor)^2. The
/// canonical-metric factors (2 for so(3), sqrt 2 for so(2)) are folded into
/// the weights. Empty `torsion_keep` keeps every torsion.
LossTerms cfm_loss(const Velocity &pred, const Velocity &target,
                   const LossWeights &w,
                   std::span<const char> torsion_keep = {});

/// d(cfm_loss)/d(pred).
Velocity cfm_loss_gradient(const Velocity &pred, const Velocity &target,
                           const LossWeights &w,
                           std::span<const char> torsion_keep = {});

}  // namespace fmdock
