//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

#include "fmdock/common.hpp"

namespace fmdock {

/// Edge-type vocabulary of the token graph.
enum EdgeType : int {
  kLigandLigand = 1,
  kLigandProtein = 2,
  kProteinProtein = 3,
  kClsLink = 4,
};
inline constexpr int kNumEdgeTypes = 4;

/// Distance-aware pair bias
///   s_ij  = 1 / (|x_i - x_j|^2 + 1)
///   s~_ij = alpha_t s_ij + beta_t              (t = edge type of (i, j))
///   phi_k = N(s~_ij; mu_k, sigma_k^2)          (k = 1..K)
///   b_ij  = g(phi_ij) + h(x_i - x_j)           in R^H
/// with g a one-hidden-layer tanh MLP and h affine.
struct AttentionBiasFeaturizer {
  Eigen::VectorXd alpha;  // T
  Eigen::VectorXd beta;   // T
  Eigen::VectorXd mu;     // K
  Eigen::VectorXd sigma;  // K, > 0
  Eigen::MatrixXd g_w1;   // K x G
  Eigen::VectorXd g_b1;   // G
  Eigen::MatrixXd g_w2;   // G x H
  Eigen::VectorXd g_b2;   // H
  Eigen::MatrixXd h_w;    // 3 x H
  Eigen::VectorXd h_b;    // H

  int num_edge_types() const { return static_cast<int>(alpha.size()); }
  int num_kernels() const { return static_cast<int>(mu.size()); }
  int num_heads() const { return static_cast<int>(g_b2.size()); }

  /// Random weights; RBF centers evenly spaced on [0, 1] with width equal
  /// to the spacing; alpha = 1, beta = 0.
  static AttentionBiasFeaturizer random(int edge_types, int kernels,
                                        int hidden, int heads,
                                        std::uint64_t seed);

  /// Per-pair bias for one displacement and edge type.
  Eigen::VectorXd pair_bias(const Vec3 &delta, int edge_type) const;
  /// phi(alpha_t s + beta_t) for a given squared distance.
  Eigen::VectorXd rbf(double squared_distance, int edge_type) const;
};

/// H x (N x N) tensor, head-major.
using BiasTensor = std::vector<Eigen::MatrixXd>;

/// Edge types for tokens laid out as [ligand atoms | residues | cls].
Eigen::MatrixXi token_edge_types(int n_ligand, int n_residues, int n_cls);

/// OpenMP over rows.
BiasTensor attention_bias(const Coords &x, const Eigen::MatrixXi &edge_types,
                          const AttentionBiasFeaturizer &f);
/// Single-threaded reference.
BiasTensor attention_bias_serial(const Coords &x,
                                 const Eigen::MatrixXi &edge_types,
                                 const AttentionBiasFeaturizer &f);

}  // namespace fmdock
