//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/flowmatch.hpp"

#include <string>

namespace fmdock {

void StageConfig::validate() const {
  if (stage < 1 || stage > 3)
    throw DataError("stage must be 1, 2 or 3 (got " + std::to_string(stage)
                    + ")");
  if (!(sigma_large > sigma_medium && sigma_medium > sigma_small
        && sigma_small > 0.0))
    throw DataError("noise scales must satisfy large > medium > small > 0");
  if (!(sigma_small_angular > 0.0))
    throw DataError("sigma_small_angular must be positive");
}

void LossWeights::validate() const {
  if (w_tr < 0.0 || w_rot < 0.0 || w_tor < 0.0)
    throw DataError("loss weights must be non-negative");
}

Velocity Velocity::zero(int num_torsions) {
  Velocity v;
  v.tor = Eigen::VectorXd::Zero(num_torsions);
  return v;
}

PoseTransform interpolate(const PoseTransform &x0, const PoseTransform &x1,
                          double t) {
  if (x0.tor.size() != x1.tor.size())
    throw DataError("interpolate: torsion count mismatch");
  PoseTransform out;
  out.tr = (1.0 - t) * x0.tr + t * x1.tr;
  out.rot = slerp_so3(x0.rot, x1.rot, t);
  for (std::size_t k = 0; k < x0.tor.size(); ++k)
    out.tor.push_back(slerp_torsion(x0.tor[k], x1.tor[k], t));
  return out;
}

Velocity target_velocity(const PoseTransform &x0, const PoseTransform &x1) {
  if (x0.tor.size() != x1.tor.size())
    throw DataError("target_velocity: torsion count mismatch");
  Velocity v;
  v.tr = x1.tr - x0.tr;
  v.rot = geodesic_velocity_so3(x0.rot, x1.rot);
  v.tor.resize(static_cast<Eigen::Index>(x0.tor.size()));
  for (std::size_t k = 0; k < x0.tor.size(); ++k)
    v.tor[static_cast<Eigen::Index>(k)] = torsion_delta(x0.tor[k], x1.tor[k]);
  return v;
}

FlowSample sample_flow(const PoseTransform &truth, const StageConfig &cfg,
                       const Vec3 &stage1_center, Rng &rng) {
  cfg.validate();
  FlowSample s;
  s.x1 = truth;
  PoseTransform &x0 = s.x0;
  switch (cfg.stage) {
  case 1:
    x0.tr = stage1_center + rng.normal3(cfg.sigma_large);
    break;
  case 2:
    x0.tr = truth.tr + rng.normal3(cfg.sigma_medium);
    break;
  default:
    x0.tr = truth.tr + rng.normal3(cfg.sigma_small);
    break;
  }
  if (cfg.stage < 3) {
    x0.rot = sample_rotation_uniform(rng);
    for (const Torsion &t: truth.tor)
      x0.tor.push_back(sample_torsion_uniform(rng, t.period));
  } else {
    x0.rot = sample_rotation_gaussian(rng, truth.rot, cfg.sigma_small_angular);
    for (const Torsion &t: truth.tor)
      x0.tor.push_back(
          sample_torsion_gaussian(rng, t, cfg.sigma_small_angular));
  }
  s.t = rng.uniform();
  s.xt = interpolate(s.x0, s.x1, s.t);
  s.target = target_velocity(s.x0, s.x1);
  return s;
}

Augmented augment(const Coords &protein, const Coords &ligand,
                  const AugmentConfig &cfg, Rng &rng) {
  Augmented out;
  out.protein = protein;
  out.ligand = ligand;
  out.residue_keep.assign(protein.cols(), 1);
  out.atom_keep.assign(ligand.cols(), 1);
  if (!cfg.enabled)
    return out;

  if (cfg.random_rotation) {
    out.rotation = sample_rotation_uniform(rng);
    Vec3 c = centroid(protein.cols() > 0 ? protein : ligand);
    Mat3 r = out.rotation.matrix();
    out.protein = (r * (out.protein.colwise() - c)).colwise() + c;
    out.ligand = (r * (out.ligand.colwise() - c)).colwise() + c;
  }
  for (Eigen::Index i = 0; i < out.protein.cols(); ++i)
    out.residue_keep[i] = !rng.bernoulli(cfg.mask_rate);
  for (Eigen::Index i = 0; i < out.ligand.cols(); ++i)
    out.atom_keep[i] = !rng.bernoulli(cfg.mask_rate);
  if (cfg.coord_noise > 0.0) {
    for (Eigen::Index i = 0; i < out.protein.cols(); ++i)
      if (out.residue_keep[i])
        out.protein.col(i) += rng.normal3(cfg.coord_noise);
    for (Eigen::Index i = 0; i < out.ligand.cols(); ++i)
      if (out.atom_keep[i])
        out.ligand.col(i) += rng.normal3(cfg.coord_noise);
  }
  return out;
}

std::vector<char> torsion_keep_mask(const LigandConformer &lig,
                                    std::span<const char> atom_keep) {
  std::vector<char> keep;
  for (const RotatableBond &rb: lig.rotatable_bonds()) {
    bool axis_masked = !atom_keep[rb.a] && !atom_keep[rb.b];
    bool moving_masked = true;
    for (int i: rb.moving)
      if (atom_keep[i]) {
        moving_masked = false;
        break;
      }
    keep.push_back(!(axis_masked || moving_masked));
  }
  return keep;
}

TrainingExample make_training_sample(const LigandConformer &native,
                                     const ProteinStructure &protein,
                                     const StageConfig &cfg,
                                     const AugmentConfig &aug, Rng &rng) {
  cfg.validate();
  Augmented a = augment(protein.ca_coords(), native.coords(), aug, rng);
  LigandConformer nat = native.with_coords(a.ligand);

  // Randomize the conformer; the truth is the inverse transform.
  PoseTransform scramble;
  scramble.rot = sample_rotation_uniform(rng);
  for (const RotatableBond &rb: nat.rotatable_bonds())
    scramble.tor.push_back(sample_torsion_uniform(rng, rb.period));
  Coords scrambled = apply_pose(nat, scramble);
  LigandConformer input = nat.with_coords(scrambled).centered();

  PoseTransform truth;
  truth.tr = centroid(a.ligand);
  truth.rot = scramble.rot.inverse();
  for (const Torsion &t: scramble.tor)
    truth.tor.emplace_back(-t.theta, t.period);

  TrainingExample ex { sample_flow(truth, cfg, centroid(a.protein), rng),
                       std::move(input),
                       std::move(a.protein),
                       protein.labels(),
                       std::move(a.residue_keep),
                       std::move(a.atom_keep),
                       {} };
  ex.torsion_keep = torsion_keep_mask(ex.input, ex.atom_keep);
  return ex;
}

LossTerms cfm_loss(const Velocity &pred, const Velocity &target,
                   const LossWeights &w, std::span<const char> torsion_keep) {
  if (pred.tor.size() != target.tor.size())
    throw DataError("cfm_loss: torsion dimension mismatch ("
                    + std::to_string(pred.tor.size()) + " vs "
                    + std::to_string(target.tor.size()) + ")");
  if (!torsion_keep.empty()
      && static_cast<Eigen::Index>(torsion_keep.size()) != target.tor.size())
    throw DataError("cfm_loss: torsion mask dimension mismatch");
  LossTerms l;
  l.tr = (pred.tr - target.tr).squaredNorm();
  l.rot = (pred.rot.k - target.rot.k).squaredNorm();
  for (Eigen::Index k = 0; k < target.tor.size(); ++k) {
    if (!torsion_keep.empty() && !torsion_keep[k])
      continue;
    double d = pred.tor[k] - target.tor[k];
    l.tor += d * d;
  }
  l.total = w.w_tr * l.tr + w.w_rot * l.rot + w.w_tor * l.tor;
  return l;
}

Velocity cfm_loss_gradient(const Velocity &pred, const Velocity &target,
                           const LossWeights &w,
                           std::span<const char> torsion_keep) {
  if (pred.tor.size() != target.tor.size())
    throw DataError("cfm_loss_gradient: torsion dimension mismatch");
  Velocity g;
  g.tr = 2.0 * w.w_tr * (pred.tr - target.tr);
  g.rot.k = 2.0 * w.w_rot * (pred.rot.k - target.rot.k);
  g.tor = 2.0 * w.w_tor * (pred.tor - target.tor);
  for (Eigen::Index k = 0; k < g.tor.size(); ++k)
    if (!torsion_keep.empty() && !torsion_keep[k])
      g.tor[k] = 0.0;
  return g;
}

}  // namespace fmdock
