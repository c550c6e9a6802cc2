//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/ligand.hpp"

#include <algorithm>
#include <utility>

#include "fmdock/geometry.hpp"

namespace fmdock {

namespace {

double rotational_period(const MolGraph &g, int a, int b,
                         const std::vector<int> &moving) {
  std::vector<int> others;
  for (const auto &e: g.neighbors(b))
    if (e.nbr != a)
      others.push_back(e.nbr);
  const int k = static_cast<int>(others.size());
  if (k != 2 && k != 3)
    return kTwoPi;

  std::vector<int> atoms { a };
  atoms.insert(atoms.end(), moving.begin(), moving.end());
  MolGraph sub = g.induced(atoms);
  auto local = [&](int atom) {
    return static_cast<int>(std::find(atoms.begin(), atoms.end(), atom)
                            - atoms.begin());
  };

  std::vector<int> fixed(atoms.size(), -1);
  fixed[local(a)] = local(a);
  fixed[local(b)] = local(b);
  for (int i = 0; i < k; ++i)
    fixed[local(others[i])] = local(others[(i + 1) % k]);
  if (!has_automorphism(sub, fixed))
    return kTwoPi;
  return kTwoPi / k;
}

}  // namespace

std::vector<RotatableBond> detect_rotatable_bonds(const MolGraph &graph) {
  std::vector<RotatableBond> out;
  if (graph.size() < 4)
    return out;
  const int root = graph.center();
  for (const Bond &bd: graph.bonds()) {
    if (bd.order != 1 || bd.in_ring || bd.amide)
      continue;
    if (graph.degree(bd.i) < 2 || graph.degree(bd.j) < 2)
      continue;
    RotatableBond rb;
    std::vector<int> side_j = graph.side_of(bd.j, bd.i, bd.j);
    bool root_on_j = std::binary_search(side_j.begin(), side_j.end(), root);
    if (root_on_j) {
      rb.a = bd.j;
      rb.b = bd.i;
      rb.moving = graph.side_of(bd.i, bd.i, bd.j);
    } else {
      rb.a = bd.i;
      rb.b = bd.j;
      rb.moving = std::move(side_j);
    }
    rb.period = rotational_period(graph, rb.a, rb.b, rb.moving);
    out.push_back(std::move(rb));
  }
  std::sort(out.begin(), out.end(),
            [](const RotatableBond &x, const RotatableBond &y) {
              return std::tie(x.a, x.b) < std::tie(y.a, y.b);
            });
  return out;
}

LigandConformer::LigandConformer(std::vector<std::string> elements,
                                 Coords coords, std::vector<Bond> bonds)
    : graph_(std::move(elements), std::move(bonds)),
      coords_(std::move(coords)) {
  if (coords_.cols() != graph_.size())
    throw DataError("ligand: " + std::to_string(graph_.size())
                    + " elements but " + std::to_string(coords_.cols())
                    + " coordinates");
  if (!coords_.allFinite())
    throw DataError("ligand: non-finite coordinates");
  if (!graph_.connected())
    throw DataError("ligand: bond graph is not connected");
  if (graph_.size() < 6 || graph_.size() > 150)
    warnings_.push_back("ligand has " + std::to_string(graph_.size())
                        + " heavy atoms (expected 6-150)");
  rotatable_ = detect_rotatable_bonds(graph_);
}

LigandConformer LigandConformer::with_coords(Coords coords) const {
  if (coords.cols() != coords_.cols())
    throw DataError("ligand: coordinate count mismatch");
  LigandConformer out = *this;
  out.coords_ = std::move(coords);
  return out;
}

LigandConformer LigandConformer::centered() const {
  return with_coords(coords_.colwise() - centroid(coords_));
}

PoseTransform PoseTransform::identity(const LigandConformer &lig) {
  PoseTransform p;
  for (const auto &rb: lig.rotatable_bonds())
    p.tor.emplace_back(0.0, rb.period);
  return p;
}

Coords apply_torsions(const LigandConformer &lig, const Coords &coords,
                      const std::vector<Torsion> &tor) {
  const auto &bonds = lig.rotatable_bonds();
  if (tor.size() != bonds.size())
    throw DataError("pose has " + std::to_string(tor.size())
                    + " torsions, ligand has "
                    + std::to_string(bonds.size()));
  Coords x = coords;
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    const RotatableBond &rb = bonds[k];
    double theta = wrap_angle(tor[k].theta, rb.period);
    if (theta == 0.0)
      continue;
    Vec3 axis = (x.col(rb.b) - x.col(rb.a)).normalized();
    rotate_about_axis(x, rb.moving, x.col(rb.b), axis, theta);
  }
  return x;
}

Coords apply_pose(const LigandConformer &lig, const PoseTransform &pose) {
  Coords x = apply_torsions(lig, lig.coords(), pose.tor);
  Vec3 c = centroid(x);
  Vec3 dest = centroid(lig.coords()) + pose.tr;
  return (pose.rot.matrix() * (x.colwise() - c)).colwise() + dest;
}

std::vector<Torsion> measure_torsion_change(const LigandConformer &lig,
                                            const Coords &target) {
  if (target.cols() != lig.size())
    throw DataError("measure_torsion_change: atom count mismatch");
  const MolGraph &g = lig.graph();
  std::vector<Torsion> out;
  for (const RotatableBond &rb: lig.rotatable_bonds()) {
    int na = -1, nb = -1;
    for (const auto &e: g.neighbors(rb.a))
      if (e.nbr != rb.b) {
        na = e.nbr;
        break;
      }
    for (const auto &e: g.neighbors(rb.b))
      if (e.nbr != rb.a) {
        nb = e.nbr;
        break;
      }
    const Coords &x = lig.coords();
    double d0 = dihedral(x.col(na), x.col(rb.a), x.col(rb.b), x.col(nb));
    double d1 = dihedral(target.col(na), target.col(rb.a), target.col(rb.b),
                         target.col(nb));
    out.emplace_back(d1 - d0, rb.period);
  }
  return out;
}

PoseTransform forward_pose(const LigandConformer &lig, const Coords &target) {
  PoseTransform p;
  p.tor = measure_torsion_change(lig, target);
  Coords xt = apply_torsions(lig, lig.coords(), p.tor);
  Vec3 ct = centroid(target);
  Mat3 r = kabsch_rotation(xt.colwise() - centroid(xt), target.colwise() - ct);
  p.rot = Rotation3::from_matrix(r);
  p.tr = ct - centroid(lig.coords());
  return p;
}

PoseTransform relative_pose(const LigandConformer &lig, const Coords &target) {
  PoseTransform fwd = forward_pose(lig, target);
  PoseTransform inv;
  inv.tr = -fwd.tr;
  inv.rot = fwd.rot.inverse();
  for (const Torsion &t: fwd.tor)
    inv.tor.emplace_back(-t.theta, t.period);
  return inv;
}

}  // namespace fmdock
