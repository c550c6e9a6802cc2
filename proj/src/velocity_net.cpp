//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/velocity_net.hpp"

#include <algorithm>
#include <string>

#include "fmdock/geometry.hpp"
#include "fmdock/rng.hpp"

namespace fmdock {

DockingContext::DockingContext(LigandConformer ligand, const Coords &residues,
                               std::span<const int> labels,
                               std::span<const char> residue_keep,
                               std::span<const char> atom_keep)
    : ligand_(std::move(ligand)) {
  const auto nres = residues.cols();
  if (static_cast<Eigen::Index>(labels.size()) != nres)
    throw DataError("DockingContext: residue label count mismatch");
  if (!residue_keep.empty()
      && static_cast<Eigen::Index>(residue_keep.size()) != nres)
    throw DataError("DockingContext: residue mask size mismatch");
  if (!atom_keep.empty()
      && static_cast<int>(atom_keep.size()) != ligand_.size())
    throw DataError("DockingContext: atom mask size mismatch");

  std::vector<int> kept_res;
  for (Eigen::Index r = 0; r < nres; ++r)
    if (residue_keep.empty() || residue_keep[r])
      kept_res.push_back(static_cast<int>(r));
  residues_.resize(3, static_cast<Eigen::Index>(kept_res.size()));
  for (std::size_t k = 0; k < kept_res.size(); ++k)
    residues_.col(static_cast<Eigen::Index>(k)) = residues.col(kept_res[k]);
  if (residues_.cols() > 0)
    center_ = fit_sphere_center(residues_);

  for (int i = 0; i < ligand_.size(); ++i)
    if (atom_keep.empty() || atom_keep[i])
      kept_.push_back(i);

  const auto &colors = ligand_.graph().colors();
  anchors_ = Coords::Zero(3, ligand_.size());
  has_anchor_.assign(ligand_.size(), 0);
  for (int i = 0; i < ligand_.size(); ++i) {
    Vec3 sum = Vec3::Zero();
    int count = 0;
    for (std::size_t k = 0; k < kept_res.size(); ++k)
      if (labels[kept_res[k]] == colors[i]) {
        sum += residues_.col(static_cast<Eigen::Index>(k));
        ++count;
      }
    if (count == 0)
      continue;
    Vec3 d = sum / count - center_;
    if (d.norm() < 1e-9)
      continue;
    anchors_.col(i) = d.normalized();
    has_anchor_[i] = 1;
  }
}

DockingContext DockingContext::from_protein(const LigandConformer &ligand,
                                            const ProteinStructure &protein) {
  std::vector<int> labels = protein.labels();
  return DockingContext(ligand, protein.ca_coords(), labels);
}

DockingContext DockingContext::from_example(const TrainingExample &ex) {
  return DockingContext(ex.input, ex.protein_ca, ex.residue_labels,
                        ex.residue_keep, ex.atom_keep);
}

VelocityFeatures featurize(const DockingContext &ctx, const PoseTransform &x) {
  const LigandConformer &lig = ctx.ligand();
  const Coords y = apply_pose(lig, x);
  const Vec3 c = centroid(y);
  const std::vector<int> &kept = ctx.kept_atoms();
  const int nk = static_cast<int>(kept.size());
  const Coords &w = ctx.anchor_directions();
  const auto &anchored = ctx.has_anchor();

  VelocityFeatures f;
  f.p = ctx.cavity_center() - c;

  // Offsets and targets of anchored atoms.
  std::vector<int> rows_anchored;
  for (int r = 0; r < nk; ++r)
    if (anchored[kept[r]])
      rows_anchored.push_back(r);
  const auto na = static_cast<Eigen::Index>(rows_anchored.size());
  Coords u(3, na), target(3, na);
  for (Eigen::Index k = 0; k < na; ++k) {
    int i = kept[rows_anchored[k]];
    u.col(k) = y.col(i) - c;
    target.col(k) = u.col(k).norm() * w.col(i);
  }

  Mat3 q = Mat3::Identity();
  if (na >= 2)
    q = kabsch_rotation(u, target);
  f.rho = Rotation3::from_matrix(q).log();
  double denom = 0.0;
  for (Eigen::Index k = 0; k < na; ++k) {
    f.torque += u.col(k).cross(target.col(k));
    denom += u.col(k).squaredNorm();
  }
  if (denom > 1e-12)
    f.torque /= denom;
  double misfit = na > 0 ? std::sqrt(((q * u) - target).colwise()
                                         .squaredNorm()
                                         .mean())
                         : 0.0;

  const Mat3 rt = x.rot.matrix().transpose();
  f.p_body = rt * f.p;
  f.rho_body = rt * f.rho;
  f.torque_body = rt * f.torque;

  // Per-atom features.
  f.atoms.resize(nk, kAtomFeatures);
  const Coords &res = ctx.residues();
  for (int r = 0; r < nk; ++r) {
    int i = kept[r];
    Vec3 ui = y.col(i) - c;
    double len = ui.norm();
    double nearest = 10.0;
    for (Eigen::Index k = 0; k < res.cols(); ++k)
      nearest = std::min(nearest, (res.col(k) - y.col(i)).norm());
    double cosine = 0.0, miss = 0.0;
    if (anchored[i]) {
      cosine = len > 1e-9 ? ui.dot(w.col(i)) / len : 1.0;
      miss = (q * ui - len * w.col(i)).norm();
    }
    f.atoms.row(r) << len / 5.0, cosine, miss / 5.0,
        static_cast<double>(anchored[i]), nearest / 10.0;
  }
  f.global.resize(1, kGlobalFeatures);
  f.global << f.p.norm() / 10.0, f.rho.norm() / kPi, misfit / 5.0,
      nk > 0 ? static_cast<double>(na) / nk : 0.0;

  // Per-bond features.
  std::vector<int> row_of(lig.size(), -1);
  for (int r = 0; r < nk; ++r)
    row_of[kept[r]] = r;
  const auto &rbs = lig.rotatable_bonds();
  const auto m = static_cast<Eigen::Index>(rbs.size());
  f.bonds.resize(m, kBondFeatures);
  f.bond_channels.resize(m, 2);
  f.moving_rows.resize(rbs.size());
  const Mat3 qt = q.transpose();
  for (Eigen::Index k = 0; k < m; ++k) {
    const RotatableBond &rb = rbs[k];
    Vec3 axis = (y.col(rb.b) - y.col(rb.a)).normalized();
    double a = 0.0, b = 0.0;
    for (int j: rb.moving) {
      if (row_of[j] >= 0)
        f.moving_rows[k].push_back(row_of[j]);
      if (row_of[j] < 0 || !anchored[j])
        continue;
      Vec3 uj = y.col(j) - c;
      Vec3 goal = c + qt * (uj.norm() * w.col(j));
      Vec3 r = y.col(j) - y.col(rb.b);
      Vec3 s = goal - y.col(rb.b);
      Vec3 rp = r - axis * axis.dot(r);
      Vec3 sp = s - axis * axis.dot(s);
      a += rp.dot(sp);
      b += axis.cross(rp).dot(sp);
    }
    double delta = (a * a + b * b > 1e-18) ? std::atan2(b, a) : 0.0;
    delta = wrap_angle(delta, rb.period);
    f.bond_channels(k, 0) = delta;
    f.bond_channels(k, 1) = f.rho.dot(axis);
    f.bonds.row(k) << delta / kPi, std::abs(delta) / kPi, std::cos(delta),
        static_cast<double>(rb.moving.size()) / lig.size(),
        rb.period / kTwoPi;
  }
  return f;
}

Eigen::MatrixXd TimeEmbedding::features(double t) const {
  Eigen::MatrixXd out(1, input_width());
  int c = 0;
  out(0, c++) = t;
  for (int fr: frequencies) {
    out(0, c++) = std::sin(fr * kPi * t);
    out(0, c++) = std::cos(fr * kPi * t);
  }
  out(0, c++) = 0.1 / (1.1 - t);
  return out;
}

ToyVelocityNet::ToyVelocityNet(NetArch arch): arch_(std::move(arch)) {
  std::uint64_t s = arch_.seed;
  const int ah = arch_.atom_hidden, th = arch_.time.hidden,
            kh = arch_.trunk_hidden, bh = arch_.bond_hidden;
  atom1_ = ad::make_dense(params_, "atom1", kAtomFeatures, ah,
                          derive_seed(s, 1));
  atom2_ = ad::make_dense(params_, "atom2", ah, ah, derive_seed(s, 2));
  time1_ = ad::make_dense(params_, "time1", arch_.time.input_width(), th,
                          derive_seed(s, 3));
  trunk1_ = ad::make_dense(params_, "trunk1", ah + th + kGlobalFeatures, kh,
                           derive_seed(s, 4));
  trunk2_ = ad::make_dense(params_, "trunk2", kh, kh, derive_seed(s, 5));
  head_ = ad::make_dense(params_, "head", kh, 6, derive_seed(s, 6), 0.1);
  bond1_ = ad::make_dense(params_, "bond1", ah + kBondFeatures + kh, bh,
                          derive_seed(s, 7));
  bond_head_ = ad::make_dense(params_, "bond_head", bh, 2, derive_seed(s, 8),
                              0.1);
  // Start near the identity response: v_tr ~ p, v_rot ~ rho_body,
  // v_tor ~ delta.
  params_[head_.bias].value << 1, 0, 0, 0, 1, 0;
  params_[bond_head_.bias].value << 1, 0;
}

void ToyVelocityNet::zero_parameters() {
  for (auto &p: params_)
    p.value.setZero();
}

ToyVelocityNet::Outputs ToyVelocityNet::build(ad::Tape &tape,
                                              const VelocityFeatures &f,
                                              double t,
                                              ad::GradBuffer *grads) const {
  using namespace ad;
  if (f.atoms.cols() != kAtomFeatures || f.global.cols() != kGlobalFeatures
      || f.bonds.cols() != kBondFeatures || f.bond_channels.cols() != 2
      || f.bonds.rows() != f.bond_channels.rows())
    throw DataError("ToyVelocityNet: feature shape mismatch");

  Var atoms = tape.constant(f.atoms);
  Var h = ad::tanh(tape, dense(tape, params_, atom1_, atoms, grads));
  h = ad::tanh(tape, dense(tape, params_, atom2_, h, grads));
  Var pooled = mean_rows(tape, h);

  Var tf = tape.constant(arch_.time.features(t));
  Var te = ad::tanh(tape, dense(tape, params_, time1_, tf, grads));

  Var glob = tape.constant(f.global);
  std::array<Var, 3> trunk_in { pooled, te, glob };
  Var z = concat_cols(tape, trunk_in);
  z = ad::tanh(tape, dense(tape, params_, trunk1_, z, grads));
  z = ad::tanh(tape, dense(tape, params_, trunk2_, z, grads));
  Var coef = dense(tape, params_, head_, z, grads);  // 1 x 6

  Matrix basis = Matrix::Zero(6, 6);
  basis.block<1, 3>(0, 0) = f.p.transpose();
  basis.block<1, 3>(1, 0) = f.rho.transpose();
  basis.block<1, 3>(2, 0) = f.torque.transpose();
  basis.block<1, 3>(3, 3) = f.p_body.transpose();
  basis.block<1, 3>(4, 3) = f.rho_body.transpose();
  basis.block<1, 3>(5, 3) = f.torque_body.transpose();
  Outputs out;
  out.head = matmul(tape, coef, tape.constant(std::move(basis)));

  const int m = static_cast<int>(f.bonds.rows());
  if (m > 0) {
    Var tokens = gather_mean(tape, h, f.moving_rows);
    Var bf = tape.constant(f.bonds);
    Var ctx = repeat_rows(tape, z, m);
    std::array<Var, 3> bond_in { tokens, bf, ctx };
    Var b = concat_cols(tape, bond_in);
    b = ad::tanh(tape, dense(tape, params_, bond1_, b, grads));
    Var bc = dense(tape, params_, bond_head_, b, grads);  // m x 2
    out.tor = row_sum(tape, mul(tape, bc, tape.constant(f.bond_channels)));
  }
  return out;
}

Velocity ToyVelocityNet::unpack(const ad::Tape &tape, const Outputs &o,
                                int m) {
  Velocity v;
  const ad::Matrix &head = tape.value(o.head);
  v.tr = head.block<1, 3>(0, 0).transpose();
  v.rot.k = head.block<1, 3>(0, 3).transpose();
  v.tor = m > 0 ? Eigen::VectorXd(tape.value(o.tor).col(0))
                : Eigen::VectorXd::Zero(0);
  return v;
}

Velocity ToyVelocityNet::forward(const VelocityFeatures &f, double t) const {
  ad::Tape tape;
  Outputs o = build(tape, f, t, nullptr);
  return unpack(tape, o, static_cast<int>(f.bonds.rows()));
}

Velocity ToyVelocityNet::predict(const DockingContext &ctx,
                                 const PoseTransform &x, double t) const {
  if (static_cast<int>(x.tor.size()) != ctx.ligand().num_torsions())
    throw DataError("ToyVelocityNet: pose has "
                    + std::to_string(x.tor.size()) + " torsions, ligand has "
                    + std::to_string(ctx.ligand().num_torsions()));
  return forward(featurize(ctx, x), t);
}

double ToyVelocityNet::accumulate_gradient(const VelocityFeatures &f,
                                           double t, const Velocity &target,
                                           const LossWeights &w,
                                           std::span<const char> torsion_keep,
                                           ad::GradBuffer &grads) const {
  ad::Tape tape;
  Outputs o = build(tape, f, t, &grads);
  const int m = static_cast<int>(f.bonds.rows());
  Velocity pred = unpack(tape, o, m);
  LossTerms loss = cfm_loss(pred, target, w, torsion_keep);
  Velocity g = cfm_loss_gradient(pred, target, w, torsion_keep);

  ad::Matrix gh(1, 6);
  gh << g.tr.transpose(), g.rot.k.transpose();
  std::vector<std::pair<ad::Var, ad::Matrix>> seeds;
  seeds.emplace_back(o.head, std::move(gh));
  if (m > 0)
    seeds.emplace_back(o.tor, ad::Matrix(g.tor));
  tape.backward(seeds);
  return loss.total;
}

std::vector<double> train(ToyVelocityNet &net, std::span<const TrainItem> data,
                          const TrainConfig &cfg,
                          const std::function<void(int, double)> &progress) {
  if (data.empty())
    throw DataError("train: empty dataset");
  if (cfg.steps < 0 || cfg.batch_size < 1)
    throw DataError("train: steps must be >= 0 and batch_size >= 1");
  cfg.stage.validate();
  cfg.weights.validate();

  auto opt = ad::make_optimizer(cfg.optimizer, net.params());
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  const int bs = cfg.batch_size;
  std::vector<ad::GradBuffer> parts(bs, ad::GradBuffer(net.params()));
  std::vector<double> part_loss(bs);
  std::vector<std::string> part_error(bs);

  for (int step = 0; step < cfg.steps; ++step) {
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < bs; ++b) {
      try {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(step),
                            static_cast<std::uint64_t>(b)));
        const TrainItem &item = data[rng.index(data.size())];
        TrainingExample ex = make_training_sample(*item.native, *item.protein,
                                                  cfg.stage, cfg.augment, rng);
        DockingContext ctx = DockingContext::from_example(ex);
        VelocityFeatures f = featurize(ctx, ex.sample.xt);
        parts[b].zero();
        part_loss[b] = net.accumulate_gradient(f, ex.sample.t,
                                               ex.sample.target, cfg.weights,
                                               ex.torsion_keep, parts[b]);
      } catch (const std::exception &e) {
        part_error[b] = e.what();
      }
    }
    ad::GradBuffer total(net.params());
    double loss = 0.0;
    for (int b = 0; b < bs; ++b) {
      if (!part_error[b].empty())
        throw DataError("train step " + std::to_string(step) + ": "
                        + part_error[b]);
      total += parts[b];
      loss += part_loss[b];
    }
    loss /= bs;
    total.scale(1.0 / bs);
    if (!std::isfinite(loss) || !total.all_finite())
      throw NumericError("training diverged at step " + std::to_string(step)
                         + " (loss " + std::to_string(loss)
                         + "); lower the learning rate or enable grad_clip");
    opt->step(net.params(), total);
    losses.push_back(loss);
    if (progress)
      progress(step, loss);
  }
  return losses;
}

}  // namespace fmdock
