//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmdock/autodiff.hpp"
#include "fmdock/filters.hpp"
#include "fmdock/ligand.hpp"
#include "fmdock/protein.hpp"

namespace fmdock {

inline constexpr int kPoseFeatures = 12;

/// Rigid-motion-invariant pose descriptors for one complex:
///   0-2  protein atoms within 4/6/8 A, per ligand atom
///   3    min ligand-protein distance / 5
///   4    mean nearest-protein distance / 5
///   5    min d / (r_i + r_j), capped at 2
///   6    overlap fraction
///   7    worst intramolecular ratio, capped at 2
///   8    nearest contact / 5, capped at 4
///   9    radius of gyration / 5
///   10   ligand centroid offset from the cavity center / 5
///   11   label complementarity (mean cosine to matched residues; 0 if none)
class PoseFeaturizer {
public:
  PoseFeaturizer(const LigandConformer &ligand,
                 const ProteinStructure &protein,
                 const FilterThresholds &thresholds = {});

  Eigen::RowVectorXd features(const Coords &ligand) const;
  Eigen::RowVectorXd features(const Coords &ligand,
                              const ValidityReport &report) const;
  const PoseChecker &checker() const { return checker_; }

private:
  PoseChecker checker_;
  Coords prot_;
  Vec3 center_ = Vec3::Zero();
  Coords anchor_dir_;
  std::vector<char> has_anchor_;
};

struct PairLoss {
  double loss = 0.0;
  double d_score_i = 0.0;
  double d_score_j = 0.0;
  bool tied = false;
};

/// log(1 + exp(-(s_better - s_worse))), better = lower RMSD. Pairs with
/// |rmsd_i - rmsd_j| < tie are ignored (zero loss and gradient).
PairLoss pairwise_rank_loss(double score_i, double score_j, double rmsd_i,
                            double rmsd_j, double tie = 0.1);

/// Candidate poses of one complex with their RMSD to the native pose.
struct ScorerBatch {
  Eigen::MatrixXd features;  // poses x kPoseFeatures
  std::vector<double> rmsd;
};

struct ScorerArch {
  int hidden = 16;
  std::uint64_t seed = 7;
};

/// Standardized features -> tanh MLP -> scalar; higher is better.
class Scorer {
public:
  explicit Scorer(ScorerArch arch = {});

  const ScorerArch &arch() const { return arch_; }
  ad::ParameterSet &params() { return params_; }
  const ad::ParameterSet &params() const { return params_; }
  Eigen::RowVectorXd &feature_mean() { return mean_; }
  Eigen::RowVectorXd &feature_scale() { return scale_; }
  const Eigen::RowVectorXd &feature_mean() const { return mean_; }
  const Eigen::RowVectorXd &feature_scale() const { return scale_; }

  /// Sets the standardization from the pooled training features.
  void fit_standardization(std::span<const ScorerBatch> data);

  Eigen::VectorXd score(const Eigen::MatrixXd &features) const;

  /// Mean pairwise loss over the batch; adds its parameter gradient into
  /// `grads`. Returns the number of non-tied pairs through `pairs`.
  double accumulate_gradient(const ScorerBatch &batch, double tie,
                             ad::GradBuffer &grads, int &pairs) const;

private:
  ad::Var build(ad::Tape &tape, const Eigen::MatrixXd &features,
                ad::GradBuffer *grads) const;

  ScorerArch arch_;
  ad::ParameterSet params_;
  ad::Dense l1_, l2_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
};

struct ScorerTrainConfig {
  int epochs = 60;
  double tie = 0.1;
  std::uint64_t seed = 0;
  ad::OptimizerConfig optimizer { ad::OptimizerConfig::Kind::AdamW, 3e-3 };
};

struct ScorerTrainReport {
  std::vector<double> epoch_loss;
  int skipped_batches = 0;
  std::vector<std::string> warnings;
};

/// One optimizer step per complex batch, batches shuffled per epoch.
/// All-tied batches are skipped with a warning.
ScorerTrainReport train_scorer(Scorer &scorer,
                               std::span<const ScorerBatch> data,
                               const ScorerTrainConfig &cfg);

/// Fraction of non-tied intra-batch pairs ordered correctly by score.
double ranking_accuracy(const Scorer &scorer,
                        std::span<const ScorerBatch> data, double tie = 0.1);

/// argmax over `candidates` (all poses when empty); ties go to the lowest
/// index.
int select_pose(std::span<const double> scores,
                std::span<const int> candidates = {});

}  // namespace fmdock
