//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fmdock/autodiff.hpp"
#include "fmdock/flowmatch.hpp"
#include "fmdock/ligand.hpp"
#include "fmdock/protein.hpp"

namespace fmdock {

/// Pose-independent view of one complex as seen by the velocity field.
/// Masked residues and atoms are dropped, not zeroed.
class DockingContext {
public:
  DockingContext(LigandConformer ligand, const Coords &residues,
                 std::span<const int> labels,
                 std::span<const char> residue_keep = {},
                 std::span<const char> atom_keep = {});

  static DockingContext from_protein(const LigandConformer &ligand,
                                     const ProteinStructure &protein);
  static DockingContext from_example(const TrainingExample &ex);

  const LigandConformer &ligand() const { return ligand_; }
  const Coords &residues() const { return residues_; }
  /// Least-squares sphere center of the kept residue CA.
  const Vec3 &cavity_center() const { return center_; }
  /// Kept ligand atoms, ascending.
  const std::vector<int> &kept_atoms() const { return kept_; }
  /// Unit direction from the cavity center to the residues labeled with
  /// the atom's color; zero when the atom has no kept partner.
  const Coords &anchor_directions() const { return anchors_; }
  const std::vector<char> &has_anchor() const { return has_anchor_; }

private:
  LigandConformer ligand_;
  Coords residues_;
  Vec3 center_ = Vec3::Zero();
  std::vector<int> kept_;
  Coords anchors_;
  std::vector<char> has_anchor_;
};

inline constexpr int kAtomFeatures = 5;
inline constexpr int kGlobalFeatures = 4;
inline constexpr int kBondFeatures = 5;

/// Geometric inputs of the toy field at one pose.
///   p      : cavity center - ligand centroid (space frame)
///   rho    : log of the best rotation taking each atom offset onto its
///            anchor direction (space frame)
///   torque : sum u x target / sum |u|^2 (space frame)
///   *_body : the same vectors expressed in the ligand body frame
///   bond_channels(k) = (best angle about bond k matching its moving atoms
///                       to the rotation-corrected targets, rho . axis_k)
struct VelocityFeatures {
  Eigen::MatrixXd atoms;   // kept atoms x kAtomFeatures
  Eigen::MatrixXd global;  // 1 x kGlobalFeatures
  Eigen::MatrixXd bonds;   // m x kBondFeatures
  Eigen::MatrixXd bond_channels;               // m x 2
  std::vector<std::vector<int>> moving_rows;   // rows of `atoms`
  Vec3 p = Vec3::Zero();
  Vec3 rho = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  Vec3 p_body = Vec3::Zero();
  Vec3 rho_body = Vec3::Zero();
  Vec3 torque_body = Vec3::Zero();
};

VelocityFeatures featurize(const DockingContext &ctx, const PoseTransform &x);

/// [t, sin(f pi t), cos(f pi t) for f in freqs, 0.1 / (1.1 - t)].
struct TimeEmbedding {
  std::vector<int> frequencies { 1, 2, 3, 4 };
  int hidden = 16;

  int input_width() const {
    return 2 + 2 * static_cast<int>(frequencies.size());
  }
  Eigen::MatrixXd features(double t) const;  // 1 x input_width()
};

struct NetArch {
  int atom_hidden = 32;
  int trunk_hidden = 32;
  int bond_hidden = 32;
  TimeEmbedding time;
  std::uint64_t seed = 1;
};

/// Small equivariant stand-in for the transformer backbone.
///
/// The pooled atom embedding plays the role of the CLS_tr / CLS_rot tokens.
/// A trunk over [pooled, time, global] emits six coefficients that combine
/// the equivariant channels:
///   v_tr  = a0 p + a1 rho + a2 torque
///   v_rot = b0 p_body + b1 rho_body + b2 torque_body
/// Each rotatable bond gets a token from the mean of its moving-atom
/// embeddings plus bond features and emits two coefficients for its
/// channels. All-zero parameters give a zero field.
class ToyVelocityNet {
public:
  explicit ToyVelocityNet(NetArch arch = {});

  const NetArch &arch() const { return arch_; }
  ad::ParameterSet &params() { return params_; }
  const ad::ParameterSet &params() const { return params_; }

  Velocity forward(const VelocityFeatures &f, double t) const;
  Velocity predict(const DockingContext &ctx, const PoseTransform &x,
                   double t) const;

  /// Adds d(cfm_loss)/d(params) for one sample into `grads`; returns the
  /// loss.
  double accumulate_gradient(const VelocityFeatures &f, double t,
                             const Velocity &target, const LossWeights &w,
                             std::span<const char> torsion_keep,
                             ad::GradBuffer &grads) const;

  void zero_parameters();

private:
  struct Outputs {
    ad::Var head;  // 1 x 6 = (v_tr, v_rot)
    ad::Var tor;   // m x 1, id < 0 when m = 0
  };
  Outputs build(ad::Tape &tape, const VelocityFeatures &f, double t,
                ad::GradBuffer *grads) const;
  static Velocity unpack(const ad::Tape &tape, const Outputs &o, int m);

  NetArch arch_;
  ad::ParameterSet params_;
  ad::Dense atom1_, atom2_, time1_, trunk1_, trunk2_, head_, bond1_,
      bond_head_;
};

struct TrainItem {
  // Ligand at its native pose and its receptor.
  const LigandConformer *native = nullptr;
  const ProteinStructure *protein = nullptr;
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 16;
  std::uint64_t seed = 0;
  StageConfig stage;
  AugmentConfig augment;
  LossWeights weights;
  ad::OptimizerConfig optimizer;
};

/// Stage training loop. Batch elements are built and differentiated in parallel;
/// their gradients are reduced in index order so results do not depend on
/// the thread count. Throws NumericError on a non-finite loss.
std::vector<double> train(ToyVelocityNet &net, std::span<const TrainItem> data,
                          const TrainConfig &cfg,
                          const std::function<void(int, double)> &progress = {});

}  // namespace fmdock
