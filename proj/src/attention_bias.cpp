//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/attention_bias.hpp"

#include <string>

#include "fmdock/rng.hpp"

namespace fmdock {

namespace {

Eigen::MatrixXd uniform_matrix(Rng &rng, int rows, int cols, double limit) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      m(i, j) = rng.uniform(-limit, limit);
  return m;
}

void check_inputs(const Coords &x, const Eigen::MatrixXi &types,
                  const AttentionBiasFeaturizer &f) {
  const auto n = x.cols();
  if (types.rows() != n || types.cols() != n)
    throw DataError("attention_bias: edge-type matrix must be "
                    + std::to_string(n) + "x" + std::to_string(n));
  const int t_max = f.num_edge_types();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (types(i, j) < 1 || types(i, j) > t_max)
        throw DataError("attention_bias: invalid edge type "
                        + std::to_string(types(i, j)) + " at ("
                        + std::to_string(i) + ", " + std::to_string(j)
                        + "), expected 1.." + std::to_string(t_max));
}

void fill_row(const Coords &x, const Eigen::MatrixXi &types,
              const AttentionBiasFeaturizer &f, Eigen::Index i,
              BiasTensor &out) {
  const int heads = f.num_heads();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd b = f.pair_bias(x.col(i) - x.col(j), types(i, j));
    for (int h = 0; h < heads; ++h)
      out[h](i, j) = b[h];
  }
}

BiasTensor allocate(const Coords &x, const AttentionBiasFeaturizer &f) {
  return BiasTensor(f.num_heads(), Eigen::MatrixXd(x.cols(), x.cols()));
}

}  // namespace

AttentionBiasFeaturizer AttentionBiasFeaturizer::random(int edge_types,
                                                        int kernels,
                                                        int hidden, int heads,
                                                        std::uint64_t seed) {
  if (edge_types < 1 || kernels < 2 || hidden < 1 || heads < 1)
    throw DataError("AttentionBiasFeaturizer: invalid dimensions");
  Rng rng(seed);
  AttentionBiasFeaturizer f;
  f.alpha = Eigen::VectorXd::Ones(edge_types);
  f.beta = Eigen::VectorXd::Zero(edge_types);
  f.mu = Eigen::VectorXd::LinSpaced(kernels, 0.0, 1.0);
  f.sigma = Eigen::VectorXd::Constant(kernels, 1.0 / (kernels - 1));
  f.g_w1 = uniform_matrix(rng, kernels, hidden,
                          std::sqrt(6.0 / (kernels + hidden)));
  f.g_b1 = Eigen::VectorXd::Zero(hidden);
  f.g_w2 = uniform_matrix(rng, hidden, heads, std::sqrt(6.0 / (hidden + heads)));
  f.g_b2 = Eigen::VectorXd::Zero(heads);
  f.h_w = uniform_matrix(rng, 3, heads, std::sqrt(6.0 / (3 + heads)));
  f.h_b = Eigen::VectorXd::Zero(heads);
  return f;
}

Eigen::VectorXd AttentionBiasFeaturizer::rbf(double squared_distance,
                                             int edge_type) const {
  double s = 1.0 / (squared_distance + 1.0);
  double st = alpha[edge_type - 1] * s + beta[edge_type - 1];
  Eigen::VectorXd phi(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    double z = (st - mu[k]) / sigma[k];
    phi[k] = std::exp(-0.5 * z * z) / (sigma[k] * std::sqrt(kTwoPi));
  }
  return phi;
}

Eigen::VectorXd AttentionBiasFeaturizer::pair_bias(const Vec3 &delta,
                                                   int edge_type) const {
  Eigen::VectorXd phi = rbf(delta.squaredNorm(), edge_type);
  Eigen::VectorXd hidden =
      (g_w1.transpose() * phi + g_b1).array().tanh().matrix();
  return g_w2.transpose() * hidden + g_b2 + h_w.transpose() * delta + h_b;
}

Eigen::MatrixXi token_edge_types(int n_ligand, int n_residues, int n_cls) {
  const int n = n_ligand + n_residues + n_cls;
  auto kind = [&](int i) {
    return i < n_ligand ? 0 : (i < n_ligand + n_residues ? 1 : 2);
  };
  Eigen::MatrixXi t(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int a = kind(i), b = kind(j);
      if (a == 2 || b == 2)
        t(i, j) = kClsLink;
      else if (a == 0 && b == 0)
        t(i, j) = kLigandLigand;
      else if (a == 1 && b == 1)
        t(i, j) = kProteinProtein;
      else
        t(i, j) = kLigandProtein;
    }
  return t;
}

BiasTensor attention_bias_serial(const Coords &x,
                                 const Eigen::MatrixXi &edge_types,
                                 const AttentionBiasFeaturizer &f) {
  check_inputs(x, edge_types, f);
  BiasTensor out = allocate(x, f);
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    fill_row(x, edge_types, f, i, out);
  return out;
}

BiasTensor attention_bias(const Coords &x, const Eigen::MatrixXi &edge_types,
                          const AttentionBiasFeaturizer &f) {
  check_inputs(x, edge_types, f);
  BiasTensor out = allocate(x, f);
  const auto n = x.cols();
  // Rows are disjoint; writes never alias.
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    fill_row(x, edge_types, f, i, out);
  return out;
}

}  // namespace fmdock
