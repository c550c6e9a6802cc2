//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "fmdock/attention_bias.hpp"
#include "fmdock/toysuite.hpp"
#include "fmdock/velocity_net.hpp"
#include "oracles.hpp"

namespace fmdock {
namespace {

using ad::Matrix;

Matrix random_matrix(Rng &rng, int r, int c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m(i) = rng.normal();
  return m;
}

// A graph touching every op; loss = sum(out .* weights).
TEST(Autodiff, EveryOpMatchesFiniteDifferences) {
  Rng rng(1);
  ad::ParameterSet ps;
  const int a = ps.add("a", random_matrix(rng, 5, 3));
  const int b = ps.add("b", random_matrix(rng, 3, 4));
  const int row = ps.add("row", random_matrix(rng, 1, 4));
  const int c = ps.add("c", random_matrix(rng, 5, 4));
  const Matrix wts = random_matrix(rng, 3, 9);
  const std::vector<std::vector<int>> groups = { { 0, 2 }, { 4 }, {} };

  auto run = [&](ad::GradBuffer *g) {
    ad::Tape t;
    auto va = t.param(ps, a, g), vb = t.param(ps, b, g);
    auto vr = t.param(ps, row, g), vc = t.param(ps, c, g);
    auto h = ad::tanh(t, ad::add_row(t, ad::matmul(t, va, vb), vr));
    auto m = ad::mul(t, ad::add(t, h, vc), h);
    auto pooled = ad::repeat_rows(t, ad::mean_rows(t, m), 3);
    auto gm = ad::gather_mean(t, m, groups);
    std::vector<ad::Var> parts = { pooled, gm, ad::row_sum(t, gm) };
    auto out = ad::concat_cols(t, parts);
    double loss = (t.value(out).array() * wts.array()).sum();
    if (g) {
      std::vector<std::pair<ad::Var, Matrix>> seeds = { { out, wts } };
      t.backward(seeds);
    }
    return loss;
  };
  ad::GradBuffer g(ps);
  run(&g);
  EXPECT_LT(oracle::worst_gradient_error(ps, g, [&] { return run(nullptr); }, 1e-5),
            1e-6);
}

TEST(Autodiff, GradientsAccumulateAcrossTapes) {
  Rng rng(2);
  ad::ParameterSet ps;
  ps.add("w", random_matrix(rng, 2, 2));
  ad::GradBuffer g(ps);
  for (int k = 0; k < 2; ++k) {
    ad::Tape t;
    auto w = t.param(ps, 0, &g);
    std::vector<std::pair<ad::Var, Matrix>> seeds = { { w, Matrix::Ones(2, 2) } };
    t.backward(seeds);
  }
  EXPECT_EQ(g.grads[0], Matrix::Constant(2, 2, 2.0));
  g.scale(0.5);
  EXPECT_DOUBLE_EQ(g.squared_norm(), 4.0);
  EXPECT_TRUE(g.all_finite());
}

TEST(Optimizer, ZeroLearningRateLeavesParametersUnchanged) {
  Rng rng(3);
  for (auto kind: { ad::OptimizerConfig::Kind::SgdMomentum,
                    ad::OptimizerConfig::Kind::AdamW }) {
    ad::ParameterSet ps;
    ps.add("w", random_matrix(rng, 3, 3));
    const Matrix before = ps[0].value;
    ad::OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.1;
    auto opt = ad::make_optimizer(cfg, ps);
    ad::GradBuffer g(ps);
    g.grads[0] = random_matrix(rng, 3, 3);
    for (int i = 0; i < 5; ++i)
      opt->step(ps, g);
    EXPECT_EQ(ps[0].value, before) << ad::to_string(kind);
  }
}

TEST(Optimizer, KindNamesRoundTrip) {
  for (auto kind: { ad::OptimizerConfig::Kind::SgdMomentum,
                    ad::OptimizerConfig::Kind::AdamW })
    EXPECT_EQ(ad::optimizer_kind_from_string(ad::to_string(kind)), kind);
  EXPECT_THROW(ad::optimizer_kind_from_string("lbfgs"), DataError);
}

// ---- velocity network ----------------------------------------------------------

struct NetFixture {
  SyntheticComplex complex = generate_complex(77, 3);
  DockingContext ctx = DockingContext::from_protein(complex.record.native_conformer(),
                                                    complex.record.protein);
};

PoseTransform perturbed(const LigandConformer &lig, Rng &rng, double scale) {
  PoseTransform p = PoseTransform::identity(lig);
  p.tr += rng.normal3(scale);
  p.rot = Rotation3::exp(rng.normal3(0.3 * scale));
  for (auto &t: p.tor)
    t = Torsion(t.theta + rng.normal(0.0, 0.5 * scale), t.period);
  return p;
}

TEST(VelocityNet, ZeroParametersGiveZeroField) {
  NetFixture fx;
  ToyVelocityNet net;
  net.zero_parameters();
  Rng rng(4);
  for (double t: { 0.0, 0.4, 0.95 }) {
    Velocity v = net.predict(fx.ctx, perturbed(fx.ctx.ligand(), rng, 2.0), t);
    EXPECT_EQ(v.tr.norm() + v.rot.k.norm() + v.tor.norm(), 0.0);
    EXPECT_EQ(v.tor.size(), fx.ctx.ligand().num_torsions());
  }
}

TEST(VelocityNet, ParameterGradientMatchesFiniteDifferences) {
  NetFixture fx;
  ASSERT_GT(fx.ctx.ligand().num_torsions(), 0);
  NetArch arch;
  arch.atom_hidden = arch.trunk_hidden = arch.bond_hidden = 6;
  arch.time.hidden = 4;
  ToyVelocityNet net(arch);
  Rng rng(5);
  VelocityFeatures f = featurize(fx.ctx, perturbed(fx.ctx.ligand(), rng, 3.0));
  Velocity target = net.forward(f, 0.3);
  target.tr += rng.normal3();
  target.rot = TangentSO3(target.rot.k + rng.normal3());
  for (Eigen::Index k = 0; k < target.tor.size(); ++k)
    target.tor[k] += rng.normal();
  LossWeights w { 1.0, 1.0, 3.0 };
  ad::GradBuffer g(net.params());
  const double loss = net.accumulate_gradient(f, 0.3, target, w, {}, g);
  auto fd_loss = [&] { return cfm_loss(net.forward(f, 0.3), target, w).total; };
  EXPECT_NEAR(loss, fd_loss(), 1e-12 * loss);
  EXPECT_LT(oracle::worst_gradient_error(net.params(), g, fd_loss, 1e-5, 1e-4),
            1e-5);
}

TEST(VelocityNet, IsEquivariantUnderGlobalRotation) {
  NetFixture fx;
  ToyVelocityNet net;
  Rng rng(6);
  const auto &rec = fx.complex.record;
  const LigandConformer nat = rec.native_conformer();
  const Vec3 c0 = centroid(nat.coords());
  for (int i = 0; i < 10; ++i) {
    const Mat3 g = oracle::random_rotation_matrix(rng);
    DockingContext moved = DockingContext::from_protein(
        nat, rec.protein.transformed(g, Vec3::Zero()));
    PoseTransform x = perturbed(nat, rng, 2.0), y = x;
    y.rot = Rotation3::from_matrix(g) * x.rot;
    y.tr = g * (c0 + x.tr) - c0;
    const double t = rng.uniform();
    Velocity v = net.predict(fx.ctx, x, t), w = net.predict(moved, y, t);
    EXPECT_LT((w.tr - g * v.tr).norm(), 1e-8 * (1 + v.tr.norm()));
    EXPECT_LT((w.rot.k - v.rot.k).norm(), 1e-8 * (1 + v.rot.k.norm()));
    EXPECT_LT((w.tor - v.tor).norm(), 1e-8 * (1 + v.tor.norm()));
  }
}

TEST(VelocityNet, OverfitsOneSample) {
  NetFixture fx;
  ToyVelocityNet net;
  Rng rng(7);
  VelocityFeatures f = featurize(fx.ctx, perturbed(fx.ctx.ligand(), rng, 3.0));
  Velocity target = target_velocity(
      perturbed(fx.ctx.ligand(), rng, 3.0), PoseTransform::identity(fx.ctx.ligand()));
  LossWeights w;
  ad::OptimizerConfig oc;
  oc.learning_rate = 1e-2;
  auto opt = ad::make_optimizer(oc, net.params());
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 500; ++step) {
    ad::GradBuffer g(net.params());
    last = net.accumulate_gradient(f, 0.5, target, w, {}, g);
    if (step == 0)
      first = last;
    opt->step(net.params(), g);
  }
  last = cfm_loss(net.forward(f, 0.5), target, w).total;
  EXPECT_GT(first, 0.0);
  EXPECT_LT(last, 1e-3 * first);
}

TEST(VelocityNet, TrainingIsDeterministicAndDecreasesLoss) {
  auto corpus = generate_corpus(5, 0, 6);
  std::vector<LigandConformer> natives;
  for (const auto &c: corpus)
    natives.push_back(c.record.native_conformer());
  std::vector<TrainItem> items;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    items.push_back({ &natives[i], &corpus[i].record.protein });
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.stage.stage = 2;
  cfg.optimizer.learning_rate = 3e-3;
  ToyVelocityNet a, b;
  auto la = train(a, items, cfg), lb = train(b, items, cfg);
  ASSERT_EQ(la.size(), 60u);
  EXPECT_EQ(la, lb);
  for (int p = 0; p < a.params().size(); ++p)
    EXPECT_EQ(a.params()[p].value, b.params()[p].value);
  auto mean = [](auto first, auto last) {
    return std::accumulate(first, last, 0.0) / std::distance(first, last);
  };
  EXPECT_LT(mean(la.end() - 20, la.end()), mean(la.begin(), la.begin() + 20));
}

TEST(TimeEmbedding, Layout) {
  TimeEmbedding e;
  Eigen::MatrixXd f = e.features(0.25);
  ASSERT_EQ(f.cols(), e.input_width());
  EXPECT_DOUBLE_EQ(f(0, 0), 0.25);
  EXPECT_NEAR(f(0, 1), std::sin(kPi * 0.25), 1e-15);
  EXPECT_NEAR(f(0, 2), std::cos(kPi * 0.25), 1e-15);
  EXPECT_NEAR(f(0, f.cols() - 1), 0.1 / 0.85, 1e-15);
}

// ---- attention bias --------------------------------------------------------------

double gaussian_pdf(double x, double mu, double sigma) {
  return std::exp(-0.5 * std::pow((x - mu) / sigma, 2)) / (sigma * std::sqrt(2 * kPi));
}

TEST(AttentionBias, KernelInputAtZeroAndUnitDistance) {
  auto f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 5, 8, 3, 1);
  f.alpha[1] = 0.7;
  f.beta[1] = 0.1;
  for (auto [d2, s]: { std::pair { 0.0, 1.0 }, std::pair { 1.0, 0.5 } }) {
    Eigen::VectorXd phi = f.rbf(d2, 1), psi = f.rbf(d2, 2);
    for (int k = 0; k < 5; ++k) {
      EXPECT_NEAR(phi[k], gaussian_pdf(s, f.mu[k], f.sigma[k]), 1e-12);
      EXPECT_NEAR(psi[k], gaussian_pdf(0.7 * s + 0.1, f.mu[k], f.sigma[k]), 1e-12);
    }
  }
}

TEST(AttentionBias, DisplacementTermIsTheOnlyAsymmetry) {
  Rng rng(8);
  auto f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 6, 8, 4, 2);
  Coords x = Coords::Random(3, 12) * 5.0;
  Eigen::MatrixXi types = token_edge_types(5, 6, 1);
  ASSERT_EQ(types, types.transpose());
  BiasTensor b = attention_bias_serial(x, types, f);
  for (int h = 0; h < 4; ++h)
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        const double odd = 2.0 * f.h_w.col(h).dot(x.col(i) - x.col(j));
        EXPECT_NEAR(b[h](i, j) - b[h](j, i), odd, 1e-12);
      }
}

TEST(AttentionBias, PermutationEquivariant) {
  Rng rng(9);
  auto f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 6, 8, 3, 3);
  const int n = 10;
  Coords x = Coords::Random(3, n) * 4.0;
  Eigen::MatrixXi types = token_edge_types(4, 5, 1);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.index(i + 1)]);
  Coords xp(3, n);
  Eigen::MatrixXi tp(n, n);
  for (int i = 0; i < n; ++i) {
    xp.col(i) = x.col(perm[i]);
    for (int j = 0; j < n; ++j)
      tp(i, j) = types(perm[i], perm[j]);
  }
  BiasTensor b = attention_bias(x, types, f), bp = attention_bias(xp, tp, f);
  for (int h = 0; h < 3; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        EXPECT_NEAR(bp[h](i, j), b[h](perm[i], perm[j]), 1e-12);
}

TEST(AttentionBias, ParallelMatchesSerial) {
  auto f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 8, 16, 4, 4);
  Coords x = Coords::Random(3, 80) * 10.0;
  Eigen::MatrixXi types = token_edge_types(20, 58, 2);
  BiasTensor a = attention_bias(x, types, f), b = attention_bias_serial(x, types, f);
  for (int h = 0; h < 4; ++h)
    EXPECT_EQ(a[h], b[h]);
}

TEST(AttentionBias, RejectsBadEdgeTypes) {
  auto f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 4, 4, 2, 5);
  Coords x = Coords::Random(3, 3);
  Eigen::MatrixXi t = Eigen::MatrixXi::Ones(3, 3);
  t(0, 2) = 0;
  EXPECT_THROW(attention_bias(x, t, f), DataError);
  t(0, 2) = kNumEdgeTypes + 1;
  EXPECT_THROW(attention_bias_serial(x, t, f), DataError);
  EXPECT_THROW(attention_bias(x, Eigen::MatrixXi::Ones(2, 3), f), DataError);
}

TEST(AttentionBias, TokenEdgeTypeLayout) {
  Eigen::MatrixXi t = token_edge_types(2, 2, 1);
  EXPECT_EQ(t(0, 1), kLigandLigand);
  EXPECT_EQ(t(0, 2), kLigandProtein);
  EXPECT_EQ(t(3, 2), kProteinProtein);
  EXPECT_EQ(t(4, 0), kClsLink);
  EXPECT_EQ(t(4, 4), kClsLink);
}

}  // namespace
}  // namespace fmdock
