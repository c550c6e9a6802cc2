//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/scorer.hpp"

#include <algorithm>
#include <numeric>

#include "fmdock/geometry.hpp"
#include "fmdock/rng.hpp"

namespace fmdock {

PoseFeaturizer::PoseFeaturizer(const LigandConformer &ligand,
                               const ProteinStructure &protein,
                               const FilterThresholds &thresholds)
    : checker_(ligand.graph(), protein.heavy_atoms(), protein.heavy_elements(),
               thresholds),
      prot_(protein.heavy_atoms()) {
  Coords ca = protein.ca_coords();
  center_ = fit_sphere_center(ca);
  const auto &colors = ligand.graph().colors();
  anchor_dir_ = Coords::Zero(3, ligand.size());
  has_anchor_.assign(ligand.size(), 0);
  for (int i = 0; i < ligand.size(); ++i) {
    Vec3 acc = Vec3::Zero();
    int m = 0;
    for (const auto &r: protein.residues)
      if (r.label >= 0 && r.label == colors[i]) {
        acc += r.ca;
        ++m;
      }
    if (m == 0 || (acc / m - center_).norm() < 1e-9)
      continue;
    anchor_dir_.col(i) = (acc / m - center_).normalized();
    has_anchor_[i] = 1;
  }
}

Eigen::RowVectorXd PoseFeaturizer::features(const Coords &ligand) const {
  return features(ligand, checker_.check(ligand));
}

Eigen::RowVectorXd PoseFeaturizer::features(const Coords &ligand,
                                            const ValidityReport &rep) const {
  const auto n = ligand.cols();
  double c4 = 0, c6 = 0, c8 = 0, dmin = 1e30, nearest_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = 1e30;
    for (Eigen::Index j = 0; j < prot_.cols(); ++j) {
      double d = (ligand.col(i) - prot_.col(j)).norm();
      best = std::min(best, d);
      c4 += d <= 4.0;
      c6 += d <= 6.0;
      c8 += d <= 8.0;
    }
    dmin = std::min(dmin, best);
    nearest_sum += best;
  }
  Vec3 c = centroid(ligand);
  double rg = std::sqrt((ligand.colwise() - c).colwise().squaredNorm().mean());
  double comp = 0.0;
  int m = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec3 u = ligand.col(i) - center_;
    if (!has_anchor_[i] || u.norm() < 1e-9)
      continue;
    comp += u.normalized().dot(anchor_dir_.col(i));
    ++m;
  }
  Eigen::RowVectorXd f(kPoseFeatures);
  f << c4 / n, c6 / n, c8 / n, dmin / 5.0, nearest_sum / n / 5.0,
      std::min(rep.min_distance_ratio, 2.0), rep.overlap_fraction,
      std::min(rep.worst_internal_ratio, 2.0),
      std::min(rep.nearest_contact / 5.0, 4.0), rg / 5.0,
      (c - center_).norm() / 5.0, m ? comp / m : 0.0;
  return f;
}

PairLoss pairwise_rank_loss(double score_i, double score_j, double rmsd_i,
                            double rmsd_j, double tie) {
  PairLoss out;
  if (std::abs(rmsd_i - rmsd_j) < tie) {
    out.tied = true;
    return out;
  }
  const bool i_better = rmsd_i < rmsd_j;
  const double d = i_better ? score_i - score_j : score_j - score_i;
  // softplus(-d), stable for both signs.
  out.loss = d >= 0.0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d));
  const double sig = 1.0 / (1.0 + std::exp(d));  // sigmoid(-d)
  out.d_score_i = i_better ? -sig : sig;
  out.d_score_j = -out.d_score_i;
  return out;
}

Scorer::Scorer(ScorerArch arch): arch_(arch) {
  l1_ = ad::make_dense(params_, "score1", kPoseFeatures, arch_.hidden,
                       derive_seed(arch_.seed, 1));
  l2_ = ad::make_dense(params_, "score2", arch_.hidden, 1,
                       derive_seed(arch_.seed, 2));
  mean_ = Eigen::RowVectorXd::Zero(kPoseFeatures);
  scale_ = Eigen::RowVectorXd::Ones(kPoseFeatures);
}

void Scorer::fit_standardization(std::span<const ScorerBatch> data) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(kPoseFeatures);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(kPoseFeatures);
  double n = 0;
  for (const auto &b: data) {
    sum += b.features.colwise().sum();
    sq += b.features.array().square().matrix().colwise().sum();
    n += static_cast<double>(b.features.rows());
  }
  if (n < 1)
    return;
  mean_ = sum / n;
  Eigen::RowVectorXd var = sq / n - mean_.cwiseProduct(mean_);
  for (int k = 0; k < kPoseFeatures; ++k)
    scale_[k] = var[k] > 1e-12 ? 1.0 / std::sqrt(var[k]) : 1.0;
}

ad::Var Scorer::build(ad::Tape &tape, const Eigen::MatrixXd &features,
                      ad::GradBuffer *grads) const {
  if (features.cols() != kPoseFeatures)
    throw DataError("Scorer: expected " + std::to_string(kPoseFeatures)
                    + " features, got " + std::to_string(features.cols()));
  Eigen::MatrixXd z = (features.rowwise() - mean_).array().rowwise()
                      * scale_.array();
  ad::Var x = tape.constant(std::move(z));
  ad::Var h = ad::tanh(tape, ad::dense(tape, params_, l1_, x, grads));
  return ad::dense(tape, params_, l2_, h, grads);
}

Eigen::VectorXd Scorer::score(const Eigen::MatrixXd &features) const {
  ad::Tape tape;
  ad::Var s = build(tape, features, nullptr);
  return tape.value(s).col(0);
}

double Scorer::accumulate_gradient(const ScorerBatch &batch, double tie,
                                   ad::GradBuffer &grads, int &pairs) const {
  const auto n = batch.features.rows();
  if (static_cast<Eigen::Index>(batch.rmsd.size()) != n)
    throw DataError("Scorer: rmsd/feature count mismatch");
  ad::Tape tape;
  ad::Var s = build(tape, batch.features, &grads);
  const Eigen::VectorXd sc = tape.value(s).col(0);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 1);
  double loss = 0.0;
  pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      PairLoss p = pairwise_rank_loss(sc[i], sc[j], batch.rmsd[i],
                                      batch.rmsd[j], tie);
      if (p.tied)
        continue;
      ++pairs;
      loss += p.loss;
      g(i, 0) += p.d_score_i;
      g(j, 0) += p.d_score_j;
    }
  if (pairs == 0)
    return 0.0;
  g /= pairs;
  std::pair<ad::Var, ad::Matrix> seed { s, g };
  tape.backward(std::span(&seed, 1));
  return loss / pairs;
}

ScorerTrainReport train_scorer(Scorer &scorer,
                               std::span<const ScorerBatch> data,
                               const ScorerTrainConfig &cfg) {
  ScorerTrainReport rep;
  std::vector<int> usable;
  for (std::size_t b = 0; b < data.size(); ++b) {
    const auto &r = data[b].rmsd;
    bool any = false;
    for (std::size_t i = 0; i < r.size() && !any; ++i)
      for (std::size_t j = i + 1; j < r.size(); ++j)
        if (std::abs(r[i] - r[j]) >= cfg.tie) {
          any = true;
          break;
        }
    if (any) {
      usable.push_back(static_cast<int>(b));
    } else {
      ++rep.skipped_batches;
      rep.warnings.push_back("batch " + std::to_string(b)
                             + ": all poses tied, skipped");
    }
  }
  if (usable.empty())
    throw DataError("train_scorer: no batch with a non-tied pair");

  auto opt = ad::make_optimizer(cfg.optimizer, scorer.params());
  Rng rng(cfg.seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    for (std::size_t k = usable.size(); k > 1; --k)
      std::swap(usable[k - 1], usable[rng.index(k)]);
    double total = 0.0;
    for (int b: usable) {
      ad::GradBuffer g(scorer.params());
      int pairs = 0;
      double l = scorer.accumulate_gradient(data[b], cfg.tie, g, pairs);
      if (!std::isfinite(l) || !g.all_finite())
        throw NumericError("scorer training diverged at epoch "
                           + std::to_string(e));
      opt->step(scorer.params(), g);
      total += l;
    }
    rep.epoch_loss.push_back(total / usable.size());
  }
  return rep;
}

double ranking_accuracy(const Scorer &scorer,
                        std::span<const ScorerBatch> data, double tie) {
  long correct = 0, total = 0;
  for (const auto &b: data) {
    Eigen::VectorXd s = scorer.score(b.features);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      for (Eigen::Index j = i + 1; j < s.size(); ++j) {
        if (std::abs(b.rmsd[i] - b.rmsd[j]) < tie)
          continue;
        ++total;
        bool i_better = b.rmsd[i] < b.rmsd[j];
        correct += i_better ? s[i] > s[j] : s[j] > s[i];
      }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

int select_pose(std::span<const double> scores,
                std::span<const int> candidates) {
  if (scores.empty())
    throw DataError("select_pose: no poses");
  int best = -1;
  auto consider = [&](int i) {
    if (best < 0 || scores[i] > scores[best])
      best = i;
  };
  if (candidates.empty()) {
    for (int i = 0; i < static_cast<int>(scores.size()); ++i)
      consider(i);
  } else {
    // Lowest index among equal maxima, independent of candidate order.
    std::vector<int> c(candidates.begin(), candidates.end());
    std::sort(c.begin(), c.end());
    for (int i: c) {
      if (i < 0 || i >= static_cast<int>(scores.size()))
        throw DataError("select_pose: candidate index out of range");
      consider(i);
    }
  }
  return best;
}

}  // namespace fmdock
