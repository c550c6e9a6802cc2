//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fmdock/complex.hpp"
#include "fmdock/evalkit.hpp"
#include "fmdock/io.hpp"
#include "fmdock/scorer.hpp"
#include "fmdock/velocity_net.hpp"

// Glue used by the CLI and the end-to-end checks: train, sample, filter,
// score, select.

namespace fmdock {

TrainConfig stage_train_config(const RunConfig &cfg, int stage);

/// Trains one stage on complexes that carry native coordinates. The net
/// seed and the data stream are both derived from the stage index.
ToyVelocityNet train_stage_model(std::span<const ComplexRecord> corpus,
                                 const RunConfig &cfg, int stage,
                                 std::vector<double> *losses = nullptr);

using StageNets = std::array<const ToyVelocityNet *, 3>;

/// Staged rollout for one complex. In pocket-aware mode the complex must
/// carry a pocket center and `nets[0]` may be null.
PoseSet sample_complex(const ComplexRecord &c, const StageNets &nets,
                       const RunConfig &cfg, std::uint64_t seed,
                       bool pocket_aware = false);

/// Fills every report and the retained subset.
void filter_poses(PoseSet &set, const ComplexRecord &c,
                  const FilterThresholds &t);

/// Fills every score; reuses reports already present.
void score_poses(PoseSet &set, const ComplexRecord &c, const Scorer &scorer,
                 const FilterThresholds &t);

/// Highest score among the retained poses (all poses when unfiltered).
/// Requires scores.
int rank_poses(PoseSet &set);

/// Symmetry RMSD of every pose to the native, in the shared frame.
std::vector<double> pose_rmsds(const PoseSet &set, const ComplexRecord &c);

/// `n` noisy copies of the native pose at scales from 0.2 to 8 Angstrom,
/// with their RMSD. Index 0 is always the native itself.
ScorerBatch noisy_pose_batch(const ComplexRecord &c, int n,
                             std::uint64_t seed, const FilterThresholds &t);

struct ScorerFit {
  Scorer scorer;
  ScorerTrainReport report;
  double train_accuracy = 0.0;
};

ScorerFit train_scorer_model(std::span<const ComplexRecord> corpus,
                             const RunConfig &cfg);

/// Per-complex data needed by every selection strategy.
struct ComplexOutcome {
  std::vector<double> rmsd;
  std::vector<ValidityReport> reports;
  std::vector<double> scores;
  bool crashed = false;
};

ComplexOutcome evaluate_complex(const PoseSet &set, const ComplexRecord &c,
                                const Scorer &scorer,
                                const FilterThresholds &t);

struct SelectionSummary {
  int n = 0;
  double score_filter = 0.0;
  double score_filter_valid = 0.0;
  double score_only = 0.0;
  double random_pick = 0.0;
  double oracle = 0.0;
  // Oracle success using only the first k samples, k in `prefixes`.
  std::vector<int> prefixes;
  std::vector<double> oracle_curve;
};

/// Success at 2 A per strategy. A crashed complex counts as a failure for
/// every strategy. Random picks use stream (seed, complex index).
SelectionSummary summarize_selection(std::span<const ComplexOutcome> outcomes,
                                     std::uint64_t seed,
                                     std::vector<int> prefixes = { 1, 5, 10,
                                                                   20, 40 });

}  // namespace fmdock
