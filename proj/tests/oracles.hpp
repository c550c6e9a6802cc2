//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Independent reference computations for the tests. Nothing here calls the
// code under test for the quantity being checked.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "fmdock/autodiff.hpp"
#include "fmdock/ligand.hpp"
#include "fmdock/manifold.hpp"
#include "fmdock/protein.hpp"
#include "fmdock/rng.hpp"

namespace fmdock::oracle {

inline Mat3 skew_matrix(const Vec3 &k) {
  Mat3 s;
  s << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return s;
}

inline Mat3 expm(const Mat3 &a) { return a.exp(); }
inline Mat3 logm(const Mat3 &a) { return a.log(); }

/// Rotation from the matrix exponential of a random skew matrix with angle
/// below `max_angle`.
inline Mat3 random_rotation_matrix(Rng &rng, double max_angle = 3.0) {
  Vec3 axis = rng.normal3().normalized();
  return expm(skew_matrix(axis * rng.uniform(0.0, max_angle)));
}

inline Mat3 rot_x(double a) { return expm(skew_matrix(Vec3(a, 0, 0))); }
inline Mat3 rot_y(double a) { return expm(skew_matrix(Vec3(0, a, 0))); }
inline Mat3 rot_z(double a) { return expm(skew_matrix(Vec3(0, 0, a))); }

/// Central difference of a matrix-valued curve.
inline Mat3 central_difference(const std::function<Mat3(double)> &f, double t,
                               double h) {
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

/// Relative error with an absolute floor for entries near zero.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({ std::abs(a), std::abs(b), floor });
}

/// Central finite differences of `loss` over every scalar in `ps`;
/// returns the worst relative error against `analytic`.
inline double worst_gradient_error(
    ad::ParameterSet &ps, const ad::GradBuffer &analytic,
    const std::function<double()> &loss, double h = 1e-4,
    double floor = 1e-6) {
  double worst = 0.0;
  for (int p = 0; p < ps.size(); ++p) {
    auto &v = ps[p].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double keep = v(i);
      v(i) = keep + h;
      const double up = loss();
      v(i) = keep - h;
      const double down = loss();
      v(i) = keep;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, rel_error(analytic.grads[p](i), fd, floor));
    }
  }
  return worst;
}

/// True when `perm` maps the graph onto itself with elements and bond
/// orders preserved.
inline bool is_automorphism(const MolGraph &g, const std::vector<int> &perm) {
  for (int i = 0; i < g.size(); ++i)
    if (g.elements()[i] != g.elements()[perm[i]])
      return false;
  for (const auto &b: g.bonds()) {
    auto o = g.bond_order(perm[b.i], perm[b.j]);
    if (!o || *o != b.order)
      return false;
  }
  return true;
}

/// min over every automorphic permutation of sqrt(mean |pred[perm i] -
/// ref[i]|^2), by exhaustive enumeration.
inline double brute_force_symmetry_rmsd(const Coords &pred, const Coords &ref,
                                        const MolGraph &g) {
  std::vector<int> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    if (!is_automorphism(g, perm))
      continue;
    double s = 0.0;
    for (int i = 0; i < g.size(); ++i)
      s += (pred.col(perm[i]) - ref.col(i)).squaredNorm();
    best = std::min(best, std::sqrt(s / g.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Monte-Carlo volume of the intersection of two balls at center distance
/// d (first ball at the origin, second on +x). Samples the lens's bounding
/// box so thin lenses still get enough hits.
inline double monte_carlo_lens(double r1, double r2, double d, int n,
                               Rng &rng) {
  const double x_lo = std::max(-r1, d - r2), x_hi = std::min(r1, d + r2);
  const double w = std::min(r1, r2);
  if (x_hi <= x_lo)
    return 0.0;
  long hits = 0;
  for (int k = 0; k < n; ++k) {
    const Vec3 p(rng.uniform(x_lo, x_hi), rng.uniform(-w, w), rng.uniform(-w, w));
    hits += p.norm() <= r1 && (p - Vec3(d, 0, 0)).norm() <= r2;
  }
  return (x_hi - x_lo) * 4.0 * w * w * static_cast<double>(hits) / n;
}

// ---- molecule fixtures -------------------------------------------------------

/// C2 core with three terminal F on each carbon, staggered, tetrahedral.
inline LigandConformer ethane_like() {
  const double cc = 1.54, cf = 1.35;
  const double c = 1.0 / 3.0, s = std::sqrt(8.0) / 3.0;  // tetrahedral
  std::vector<std::string> el = { "C", "C", "F", "F", "F", "F", "F", "F" };
  Coords x(3, 8);
  x.col(0) = Vec3(0, 0, 0);
  x.col(1) = Vec3(cc, 0, 0);
  for (int k = 0; k < 3; ++k) {
    const double phi = kTwoPi * k / 3.0, psi = phi + kPi / 3.0;
    x.col(2 + k) = cf * Vec3(-c, s * std::cos(phi), s * std::sin(phi));
    x.col(5 + k) = x.col(1) + cf * Vec3(c, s * std::cos(psi), s * std::sin(psi));
  }
  std::vector<Bond> b = { { 0, 1, 1 }, { 0, 2, 1 }, { 0, 3, 1 },
                          { 0, 4, 1 }, { 1, 5, 1 }, { 1, 6, 1 },
                          { 1, 7, 1 } };
  return LigandConformer(el, x, b);
}

/// Planar six-membered carbon ring with alternating bond orders.
inline LigandConformer benzene_like() {
  std::vector<std::string> el(6, "C");
  Coords x(3, 6);
  std::vector<Bond> b;
  for (int i = 0; i < 6; ++i) {
    x.col(i) = 1.39 * Vec3(std::cos(kTwoPi * i / 6), std::sin(kTwoPi * i / 6), 0);
    b.push_back({ i, (i + 1) % 6, i % 2 ? 2 : 1 });
  }
  return LigandConformer(el, x, b);
}

/// Zig-zag A-B-C-D chain of single bonds.
inline LigandConformer chain4() {
  std::vector<std::string> el = { "C", "N", "C", "O" };
  Coords x(3, 4);
  x << 0.0, 1.5, 2.2, 3.7,
       0.0, 0.0, 1.3, 1.4,
       0.0, 0.0, 0.0, 0.5;
  return LigandConformer(el, x, { { 0, 1, 1 }, { 1, 2, 1 }, { 2, 3, 1 } });
}

/// Connected random graph of n atoms over `n_elements` element types: a
/// random tree plus `extra` ring closures. Coordinates are random.
inline LigandConformer random_molecule(Rng &rng, int n, int n_elements,
                                       int extra) {
  static const char *kEl[] = { "C", "N", "O", "S" };
  std::vector<std::string> el(n);
  for (auto &e: el)
    e = kEl[rng.index(static_cast<std::uint64_t>(n_elements))];
  std::vector<Bond> bonds;
  auto bonded = [&](int i, int j) {
    for (const auto &b: bonds)
      if ((b.i == i && b.j == j) || (b.i == j && b.j == i))
        return true;
    return false;
  };
  for (int i = 1; i < n; ++i)
    bonds.push_back({ static_cast<int>(rng.index(i)), i,
                      rng.bernoulli(0.2) ? 2 : 1 });
  for (int k = 0; k < extra; ++k) {
    int i = static_cast<int>(rng.index(n)), j = static_cast<int>(rng.index(n));
    if (i != j && !bonded(i, j))
      bonds.push_back({ i, j, 1 });
  }
  Coords x(3, n);
  for (int i = 0; i < n; ++i)
    x.col(i) = rng.normal3(2.0);
  return LigandConformer(el, x, bonds);
}

// ---- protein fixtures ----------------------------------------------------------

/// One chain of residues on a helix-like curve, numbered from 1.
inline std::vector<Residue> helix_chain(const std::string &chain, int n,
                                        const Mat3 &r, const Vec3 &t) {
  std::vector<Residue> out;
  for (int i = 0; i < n; ++i) {
    Residue res;
    res.chain = chain;
    res.number = i + 1;
    res.name = "ALA";
    Vec3 p(2.3 * std::cos(i * 1.75), 2.3 * std::sin(i * 1.75), 1.5 * i - 0.75 * n);
    // A second helix turn block to spread the pocket.
    p += Vec3(6.0 * std::cos(i * 0.21), 6.0 * std::sin(i * 0.21), 0.0);
    res.ca = r * p + t;
    res.atoms = Coords(3, 2);
    res.atoms.col(0) = res.ca;
    res.atoms.col(1) = res.ca + r * Vec3(0.0, 0.0, 1.5);
    res.atom_names = { "CA", "CB" };
    res.elements = { "C", "C" };
    out.push_back(res);
  }
  return out;
}

struct DimerFixture {
  ProteinStructure reference;
  Coords ref_ligand;
  ProteinStructure predicted;
  Coords pred_ligand;
  // The prediction sits in the chain-B copy of the chain-A site.
  bool wrong_chain = false;
};

/// Homodimer: chain B is chain A moved by a rigid transform. The reference
/// ligand sits in chain A's site. The prediction is the native pose with
/// `ligand_noise` (Angstrom) per atom, in chain A's site or, when
/// `wrong_chain`, in the symmetric site of chain B. The predicted protein
/// is the reference moved by a random rigid motion plus `protein_noise`.
inline DimerFixture make_dimer_fixture(std::uint64_t seed, bool wrong_chain,
                                       double ligand_noise = 0.3,
                                       double protein_noise = 0.2) {
  Rng rng(seed);
  const Mat3 rb = rot_z(kPi);
  const Vec3 tb(0.0, 30.0, 0.0);
  DimerFixture f;
  f.wrong_chain = wrong_chain;
  auto a = helix_chain("A", 40, Mat3::Identity(), Vec3::Zero());
  auto b = helix_chain("B", 40, rb, tb);
  f.reference.residues = a;
  f.reference.residues.insert(f.reference.residues.end(), b.begin(), b.end());

  // Ligand near residues 15-20 of chain A.
  Vec3 site = Vec3::Zero();
  for (int i = 14; i < 20; ++i)
    site += a[i].ca;
  site /= 6.0;
  site += Vec3(1.0, 1.0, 0.0);
  f.ref_ligand = Coords(3, 8);
  for (int i = 0; i < 8; ++i)
    f.ref_ligand.col(i) = site + rng.normal3(1.2);

  const Mat3 g = random_rotation_matrix(rng);
  const Vec3 gt = rng.normal3(10.0);
  f.predicted = f.reference.transformed(g, gt);
  for (auto &res: f.predicted.residues) {
    Vec3 d = rng.normal3(protein_noise);
    res.ca += d;
    res.atoms.colwise() += d;
  }
  Coords lig = f.ref_ligand;
  if (wrong_chain)
    lig = (rb * lig).colwise() + tb;
  for (Eigen::Index i = 0; i < lig.cols(); ++i)
    lig.col(i) += rng.normal3(ligand_noise);
  f.pred_ligand = (g * lig).colwise() + gt;
  return f;
}

}  // namespace fmdock::oracle
