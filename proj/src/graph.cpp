//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <tuple>
#include <utility>

#include "fmdock/common.hpp"

namespace fmdock {

MolGraph::MolGraph(std::vector<std::string> elements, std::vector<Bond> bonds)
    : elements_(std::move(elements)), bonds_(std::move(bonds)),
      adj_(elements_.size()) {
  const int n = size();
  for (int b = 0; b < static_cast<int>(bonds_.size()); ++b) {
    Bond &bd = bonds_[b];
    if (bd.i < 0 || bd.j < 0 || bd.i >= n || bd.j >= n || bd.i == bd.j)
      throw DataError("bond " + std::to_string(b) + " has invalid atom indices");
    if (bond_order(bd.i, bd.j))
      throw DataError("duplicate bond between atoms " + std::to_string(bd.i)
                      + " and " + std::to_string(bd.j));
    adj_[bd.i].push_back({ bd.j, b });
    adj_[bd.j].push_back({ bd.i, b });
  }
  for (auto &edges: adj_)
    std::sort(edges.begin(), edges.end(),
              [](const Edge &x, const Edge &y) { return x.nbr < y.nbr; });
  mark_ring_bonds();
  refine_colors();
}

std::optional<int> MolGraph::bond_index(int i, int j) const {
  for (const Edge &e: adj_[i])
    if (e.nbr == j)
      return e.bond;
  return std::nullopt;
}

std::optional<int> MolGraph::bond_order(int i, int j) const {
  auto b = bond_index(i, j);
  if (!b)
    return std::nullopt;
  return bonds_[*b].order;
}

bool MolGraph::connected() const {
  if (size() == 0)
    return true;
  auto d = bfs_distances(0);
  return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

std::vector<int> MolGraph::side_of(int start, int a, int b) const {
  std::vector<char> seen(size(), 0);
  std::vector<int> out;
  std::deque<int> queue { start };
  seen[start] = 1;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    out.push_back(u);
    for (const Edge &e: adj_[u]) {
      if ((u == a && e.nbr == b) || (u == b && e.nbr == a))
        continue;
      if (!seen[e.nbr]) {
        seen[e.nbr] = 1;
        queue.push_back(e.nbr);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> MolGraph::bfs_distances(int src) const {
  std::vector<int> dist(size(), -1);
  std::deque<int> queue { src };
  dist[src] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (const Edge &e: adj_[u]) {
      if (dist[e.nbr] < 0) {
        dist[e.nbr] = dist[u] + 1;
        queue.push_back(e.nbr);
      }
    }
  }
  return dist;
}

int MolGraph::center() const {
  int best = 0, best_ecc = std::numeric_limits<int>::max();
  for (int i = 0; i < size(); ++i) {
    auto d = bfs_distances(i);
    int ecc = *std::max_element(d.begin(), d.end());
    if (ecc < best_ecc) {
      best_ecc = ecc;
      best = i;
    }
  }
  return best;
}

MolGraph MolGraph::induced(std::span<const int> atoms) const {
  std::vector<int> remap(size(), -1);
  std::vector<std::string> elems;
  for (int k = 0; k < static_cast<int>(atoms.size()); ++k) {
    remap[atoms[k]] = k;
    elems.push_back(elements_[atoms[k]]);
  }
  std::vector<Bond> bonds;
  for (const Bond &b: bonds_) {
    if (remap[b.i] >= 0 && remap[b.j] >= 0) {
      Bond nb = b;
      nb.i = remap[b.i];
      nb.j = remap[b.j];
      bonds.push_back(nb);
    }
  }
  return MolGraph(std::move(elems), std::move(bonds));
}

void MolGraph::mark_ring_bonds() {
  // Tarjan bridges; a bond is in a ring iff it is not a bridge.
  const int n = size();
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  std::vector<char> bridge(bonds_.size(), 0);

  auto dfs = [&](auto &&self, int u, int parent_bond) -> void {
    disc[u] = low[u] = timer++;
    for (const Edge &e: adj_[u]) {
      if (e.bond == parent_bond)
        continue;
      if (disc[e.nbr] < 0) {
        self(self, e.nbr, e.bond);
        low[u] = std::min(low[u], low[e.nbr]);
        if (low[e.nbr] > disc[u])
          bridge[e.bond] = 1;
      } else {
        low[u] = std::min(low[u], disc[e.nbr]);
      }
    }
  };
  for (int i = 0; i < n; ++i)
    if (disc[i] < 0)
      dfs(dfs, i, -1);
  for (std::size_t b = 0; b < bonds_.size(); ++b)
    bonds_[b].in_ring = !bridge[b];
}

void MolGraph::refine_colors() {
  const int n = size();
  colors_.assign(n, 0);
  {
    std::map<std::pair<std::string, int>, int> ids;
    for (int i = 0; i < n; ++i)
      ids.emplace(std::make_pair(elements_[i], degree(i)), 0);
    int next = 0;
    for (auto &[key, id]: ids)
      id = next++;
    for (int i = 0; i < n; ++i)
      colors_[i] = ids.at({ elements_[i], degree(i) });
    num_colors_ = next;
  }
  for (;;) {
    using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
    std::vector<Signature> sig(n);
    for (int i = 0; i < n; ++i) {
      sig[i].first = colors_[i];
      for (const Edge &e: adj_[i])
        sig[i].second.emplace_back(bonds_[e.bond].order, colors_[e.nbr]);
      std::sort(sig[i].second.begin(), sig[i].second.end());
    }
    std::map<Signature, int> ids;
    for (const auto &s: sig)
      ids.emplace(s, 0);
    int next = 0;
    for (auto &[key, id]: ids)
      id = next++;
    if (next == num_colors_)
      break;
    for (int i = 0; i < n; ++i)
      colors_[i] = ids.at(sig[i]);
    num_colors_ = next;
  }
}

namespace {

struct Search {
  const MolGraph &g;
  std::span<const int> fixed;
  std::size_t cap;
  const std::function<bool(std::span<const int>)> &visit;

  std::vector<int> order;
  std::vector<int> anchor;  // earlier-ordered neighbor, or -1
  std::vector<int> perm;
  std::vector<char> used;
  std::vector<char> reserved;
  AutomorphismCount result;
  bool stop = false;

  bool consistent(int u, int img) const {
    if (g.elements()[u] != g.elements()[img] || g.colors()[u] != g.colors()[img])
      return false;
    for (const auto &e: g.neighbors(u)) {
      int q = e.nbr;
      if (perm[q] < 0)
        continue;
      auto o = g.bond_order(img, perm[q]);
      if (!o || *o != g.bonds()[e.bond].order)
        return false;
    }
    return true;
  }

  void recurse(std::size_t depth) {
    if (stop)
      return;
    if (depth == order.size()) {
      ++result.count;
      if (result.count > cap) {
        result.truncated = true;
        stop = true;
        return;
      }
      if (!visit(perm))
        stop = true;
      return;
    }
    int u = order[depth];
    auto try_image = [&](int img) {
      if (used[img] || (reserved[img] && fixed[u] != img))
        return;
      if (!consistent(u, img))
        return;
      perm[u] = img;
      used[img] = 1;
      recurse(depth + 1);
      used[img] = 0;
      perm[u] = -1;
    };

    if (!fixed.empty() && fixed[u] >= 0) {
      try_image(fixed[u]);
    } else if (anchor[u] >= 0) {
      for (const auto &e: g.neighbors(perm[anchor[u]])) {
        try_image(e.nbr);
        if (stop)
          return;
      }
    } else {
      for (int img = 0; img < g.size(); ++img) {
        try_image(img);
        if (stop)
          return;
      }
    }
  }
};

}  // namespace

AutomorphismCount enumerate_automorphisms(
    const MolGraph &g, std::span<const int> fixed, std::size_t cap,
    const std::function<bool(std::span<const int>)> &visit) {
  const int n = g.size();
  if (!fixed.empty() && static_cast<int>(fixed.size()) != n)
    throw DataError("enumerate_automorphisms: constraint size mismatch");

  Search s { g, fixed, cap, visit, {}, {}, {}, {}, {}, {}, false };
  s.perm.assign(n, -1);
  s.used.assign(n, 0);
  s.reserved.assign(n, 0);
  s.anchor.assign(n, -1);
  if (n == 0) {
    s.result.count = 1;
    visit(s.perm);
    return s.result;
  }

  std::vector<int> class_size(g.num_colors(), 0);
  for (int c: g.colors())
    ++class_size[c];

  std::vector<char> placed(n, 0);
  std::deque<int> queue;
  auto push = [&](int u) {
    placed[u] = 1;
    queue.push_back(u);
  };
  if (!fixed.empty()) {
    for (int i = 0; i < n; ++i) {
      if (fixed[i] >= 0) {
        if (fixed[i] >= n)
          throw DataError("enumerate_automorphisms: bad constraint");
        s.reserved[fixed[i]] = 1;
        push(i);
      }
    }
  }
  for (;;) {
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      s.order.push_back(u);
      for (const auto &e: g.neighbors(u)) {
        if (!placed[e.nbr]) {
          s.anchor[e.nbr] = u;
          push(e.nbr);
        }
      }
    }
    if (static_cast<int>(s.order.size()) == n)
      break;
    int seed = -1;
    for (int i = 0; i < n; ++i) {
      if (placed[i])
        continue;
      if (seed < 0 || class_size[g.colors()[i]] < class_size[g.colors()[seed]])
        seed = i;
    }
    push(seed);
  }
  // Fixed atoms are placed first and never anchored.
  if (!fixed.empty())
    for (int i = 0; i < n; ++i)
      if (fixed[i] >= 0)
        s.anchor[i] = -1;

  s.recurse(0);
  return s.result;
}

bool has_automorphism(const MolGraph &g, std::span<const int> fixed) {
  bool found = false;
  enumerate_automorphisms(g, fixed, std::numeric_limits<std::size_t>::max(),
                          [&](std::span<const int>) {
                            found = true;
                            return false;
                          });
  return found;
}

}  // namespace fmdock
