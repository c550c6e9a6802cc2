//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/pipeline.hpp"

#include <algorithm>

#include "fmdock/manifold.hpp"
#include "fmdock/rng.hpp"
#include "fmdock/sampler.hpp"

namespace fmdock {

TrainConfig stage_train_config(const RunConfig &cfg, int stage) {
  TrainConfig tc;
  tc.steps = cfg.train_steps;
  tc.batch_size = cfg.batch_size;
  tc.seed = derive_seed(cfg.train_seed, static_cast<std::uint64_t>(stage));
  tc.stage = cfg.stage;
  tc.stage.stage = stage;
  tc.augment = cfg.augment;
  tc.weights = cfg.loss;
  tc.optimizer = cfg.optimizer;
  return tc;
}

ToyVelocityNet train_stage_model(std::span<const ComplexRecord> corpus,
                                 const RunConfig &cfg, int stage,
                                 std::vector<double> *losses) {
  if (stage < 1 || stage > 3)
    throw DataError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  std::vector<LigandConformer> natives;
  natives.reserve(corpus.size());
  for (const auto &c: corpus)
    natives.push_back(c.native_conformer());
  std::vector<TrainItem> items;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    items.push_back({ &natives[i], &corpus[i].protein });
  if (items.empty())
    throw DataError("training corpus is empty");

  NetArch arch = cfg.net;
  arch.seed = derive_seed(cfg.net.seed, static_cast<std::uint64_t>(stage));
  ToyVelocityNet net(arch);
  auto l = train(net, items, stage_train_config(cfg, stage));
  if (losses)
    *losses = std::move(l);
  return net;
}

PoseSet sample_complex(const ComplexRecord &c, const StageNets &nets,
                       const RunConfig &cfg, std::uint64_t seed,
                       bool pocket_aware) {
  DockingContext ctx = DockingContext::from_protein(c.ligand, c.protein);
  std::array<VelocityField, 3> fields;
  for (int s = 0; s < 3; ++s)
    if (nets[s])
      fields[s] = make_field(*nets[s], ctx);
  RolloutConfig rc;
  rc.n_steps = cfg.n_steps;
  rc.n_samples = cfg.n_samples;
  rc.seed = seed;
  rc.sigma_large = cfg.stage.sigma_large;
  if (pocket_aware) {
    if (!c.pocket_center)
      throw DataError("complex '" + c.id + "' has no pocket center");
    rc.pocket_center = c.pocket_center;
  }
  auto poses = staged_inference(c.ligand, c.protein.ca_centroid(), fields, rc);

  PoseSet out;
  out.complex_id = c.id;
  out.config_hash = config_hash(cfg);
  out.seed = seed;
  out.poses.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    out.poses[i].coords = apply_pose(c.ligand, poses[i]);
    out.poses[i].pose = std::move(poses[i]);
  }
  return out;
}

namespace {

void check_atoms(const PoseSet &set, const ComplexRecord &c) {
  if (set.complex_id != c.id)
    throw DataError("pose set is for '" + set.complex_id
                    + "', complex is '" + c.id + "'");
  for (const auto &p: set.poses)
    if (p.coords.cols() != c.ligand.size())
      throw DataError("pose has " + std::to_string(p.coords.cols())
                      + " atoms, ligand has "
                      + std::to_string(c.ligand.size()));
}

std::vector<Coords> pose_coords(const PoseSet &set) {
  std::vector<Coords> x;
  x.reserve(set.poses.size());
  for (const auto &p: set.poses)
    x.push_back(p.coords);
  return x;
}

}  // namespace

void filter_poses(PoseSet &set, const ComplexRecord &c,
                  const FilterThresholds &t) {
  check_atoms(set, c);
  PoseChecker checker(c.ligand.graph(), c.protein.heavy_atoms(),
                      c.protein.heavy_elements(), t);
  auto reports = checker.check_batch(pose_coords(set));
  for (std::size_t i = 0; i < reports.size(); ++i)
    set.poses[i].report = reports[i];
  set.retained = retain_best(reports);
  set.selected.reset();
}

void score_poses(PoseSet &set, const ComplexRecord &c, const Scorer &scorer,
                 const FilterThresholds &t) {
  check_atoms(set, c);
  if (set.poses.empty())
    return;
  PoseFeaturizer feat(c.ligand, c.protein, t);
  Eigen::MatrixXd f(static_cast<Eigen::Index>(set.poses.size()),
                    kPoseFeatures);
  const int n = static_cast<int>(set.poses.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto &p = set.poses[i];
    f.row(i) = p.report ? feat.features(p.coords, *p.report)
                        : feat.features(p.coords);
  }
  Eigen::VectorXd s = scorer.score(f);
  for (int i = 0; i < n; ++i)
    set.poses[i].score = s[i];
  set.selected.reset();
}

int rank_poses(PoseSet &set) {
  if (set.poses.empty())
    throw DataError("pose set '" + set.complex_id + "' has no poses");
  std::vector<double> scores;
  for (const auto &p: set.poses) {
    if (!p.score)
      throw DataError("pose set '" + set.complex_id
                      + "' is not scored; run `score` first");
    scores.push_back(*p.score);
  }
  std::vector<int> cand = set.retained.value_or(std::vector<int> {});
  if (set.retained && cand.empty())
    throw DataError("pose set '" + set.complex_id + "' retains no pose");
  int best = select_pose(scores, cand);
  set.selected = best;
  return best;
}

std::vector<double> pose_rmsds(const PoseSet &set, const ComplexRecord &c) {
  if (!c.native)
    throw DataError("complex '" + c.id + "' has no native coordinates");
  check_atoms(set, c);
  std::vector<double> out(set.poses.size());
  const int n = static_cast<int>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    out[i] = symmetry_rmsd(set.poses[i].coords, *c.native, c.ligand.graph())
                 .value;
  return out;
}

ScorerBatch noisy_pose_batch(const ComplexRecord &c, int n,
                             std::uint64_t seed, const FilterThresholds &t) {
  if (n < 2)
    throw DataError("a scorer batch needs at least 2 poses");
  LigandConformer nat = c.native_conformer();
  PoseFeaturizer feat(c.ligand, c.protein, t);
  ScorerBatch b;
  b.features.resize(n, kPoseFeatures);
  b.rmsd.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    PoseTransform p = PoseTransform::identity(nat);
    if (i > 0) {
      // Log-uniform scale so that near-native poses are well represented.
      const double s = 0.2 * std::pow(40.0, rng.uniform());
      p.tr = rng.normal3(s / std::sqrt(3.0));
      p.rot = sample_rotation_gaussian(rng, Rotation3::identity(),
                                       std::min(s / 4.0, 1.5));
      for (auto &tor: p.tor)
        tor = sample_torsion_gaussian(rng, tor, std::min(s / 4.0, 1.5));
    }
    Coords x = apply_pose(nat, p);
    b.features.row(i) = feat.features(x);
    b.rmsd[i] = symmetry_rmsd(x, *c.native, c.ligand.graph()).value;
  }
  return b;
}

ScorerFit train_scorer_model(std::span<const ComplexRecord> corpus,
                             const RunConfig &cfg) {
  std::vector<ScorerBatch> data(corpus.size());
  const int n = static_cast<int>(corpus.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    data[i] = noisy_pose_batch(corpus[i], cfg.scorer_poses,
                               derive_seed(cfg.scorer_seed, i, 1),
                               cfg.filters);
  ScorerArch arch;
  arch.hidden = cfg.scorer_hidden;
  arch.seed = cfg.scorer_seed;
  ScorerFit fit { Scorer(arch), {}, 0.0 };
  fit.scorer.fit_standardization(data);
  ScorerTrainConfig tc;
  tc.epochs = cfg.scorer_epochs;
  tc.seed = derive_seed(cfg.scorer_seed, 2);
  tc.optimizer.learning_rate = cfg.scorer_learning_rate;
  fit.report = train_scorer(fit.scorer, data, tc);
  fit.train_accuracy = ranking_accuracy(fit.scorer, data, tc.tie);
  return fit;
}

ComplexOutcome evaluate_complex(const PoseSet &set, const ComplexRecord &c,
                                const Scorer &scorer,
                                const FilterThresholds &t) {
  ComplexOutcome out;
  if (set.error || set.poses.empty()) {
    out.crashed = true;
    return out;
  }
  PoseSet work = set;
  filter_poses(work, c, t);
  score_poses(work, c, scorer, t);
  out.rmsd = pose_rmsds(work, c);
  for (const auto &p: work.poses) {
    out.reports.push_back(*p.report);
    out.scores.push_back(*p.score);
  }
  return out;
}

SelectionSummary summarize_selection(std::span<const ComplexOutcome> outcomes,
                                     std::uint64_t seed,
                                     std::vector<int> prefixes) {
  SelectionSummary s;
  s.n = static_cast<int>(outcomes.size());
  s.prefixes = std::move(prefixes);
  s.oracle_curve.assign(s.prefixes.size(), 0.0);
  if (s.n == 0)
    return s;
  auto hit = [](double r) { return r <= 2.0; };
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto &o = outcomes[k];
    if (o.crashed || o.rmsd.empty())
      continue;
    const int sf = select_pose(o.scores, retain_best(o.reports));
    s.score_filter += hit(o.rmsd[sf]);
    s.score_filter_valid += hit(o.rmsd[sf]) && o.reports[sf].pass_count == 4;
    s.score_only += hit(o.rmsd[select_pose(o.scores)]);
    Rng rng(derive_seed(seed, k));
    s.random_pick += hit(o.rmsd[rng.index(o.rmsd.size())]);
    s.oracle += hit(*std::min_element(o.rmsd.begin(), o.rmsd.end()));
    for (std::size_t j = 0; j < s.prefixes.size(); ++j) {
      auto end = o.rmsd.begin()
                 + std::min<std::ptrdiff_t>(s.prefixes[j], o.rmsd.size());
      s.oracle_curve[j] += hit(*std::min_element(o.rmsd.begin(), end));
    }
  }
  const double n = s.n;
  s.score_filter /= n;
  s.score_filter_valid /= n;
  s.score_only /= n;
  s.random_pick /= n;
  s.oracle /= n;
  for (auto &v: s.oracle_curve)
    v /= n;
  return s;
}

}  // namespace fmdock
