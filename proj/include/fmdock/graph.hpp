//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmdock {

struct Bond {
  int i = 0;
  int j = 0;
  int order = 1;
  // Derived from the graph (bond is not a bridge).
  bool in_ring = false;
  // Input metadata: excluded from rotatable-bond detection when set.
  bool amide = false;
};

/// Heavy-atom molecular graph: element labels and bonds with orders.
class MolGraph {
public:
  MolGraph() = default;
  MolGraph(std::vector<std::string> elements, std::vector<Bond> bonds);

  int size() const { return static_cast<int>(elements_.size()); }
  const std::vector<std::string> &elements() const { return elements_; }
  const std::vector<Bond> &bonds() const { return bonds_; }

  struct Edge {
    int nbr;
    int bond;
  };
  const std::vector<Edge> &neighbors(int i) const { return adj_[i]; }
  int degree(int i) const { return static_cast<int>(adj_[i].size()); }

  /// Bond order between i and j, or nullopt if not bonded.
  std::optional<int> bond_order(int i, int j) const;
  std::optional<int> bond_index(int i, int j) const;

  bool connected() const;

  /// Atoms reachable from `start` without crossing the edge (a, b).
  std::vector<int> side_of(int start, int a, int b) const;

  /// Shortest-path bond counts from `src` (-1 when unreachable).
  std::vector<int> bfs_distances(int src) const;

  /// Minimum-eccentricity atom, lowest index on ties.
  int center() const;

  /// Canonical color classes from Weisfeiler-Lehman refinement over
  /// (element, degree, bonded neighbor colors with orders). Colors are
  /// independent of atom numbering; automorphisms preserve them.
  const std::vector<int> &colors() const { return colors_; }
  int num_colors() const { return num_colors_; }

  /// Subgraph induced by `atoms`, renumbered in the given order.
  MolGraph induced(std::span<const int> atoms) const;

private:
  void mark_ring_bonds();
  void refine_colors();

  std::vector<std::string> elements_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Edge>> adj_;
  std::vector<int> colors_;
  int num_colors_ = 0;
};

struct AutomorphismCount {
  std::size_t count = 0;
  bool truncated = false;
};

/// Enumerates element- and bond-order-preserving automorphisms by
/// backtracking. `fixed[i] >= 0` pins atom i to that image. `visit` gets
/// each permutation (perm[i] = image of atom i) and may return false to
/// stop. Enumeration stops with truncated = true once more than `cap`
/// automorphisms have been found.
AutomorphismCount enumerate_automorphisms(
    const MolGraph &g, std::span<const int> fixed, std::size_t cap,
    const std::function<bool(std::span<const int>)> &visit);

/// True if g has an automorphism satisfying the constraints.
bool has_automorphism(const MolGraph &g, std::span<const int> fixed);

}  // namespace fmdock
