//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/toysuite.hpp"

#include <cstdio>
#include <optional>

#include "fmdock/filters.hpp"
#include "fmdock/geometry.hpp"
#include "fmdock/rng.hpp"

namespace fmdock {

LigandConformer ComplexRecord::native_conformer() const {
  if (!native)
    throw DataError("complex '" + id + "' has no native ligand coordinates");
  return ligand.with_coords(*native);
}

namespace {

struct RawLigand {
  std::vector<std::string> elements;
  Coords coords;
  std::vector<Bond> bonds;
};

std::string random_element(Rng &rng, bool allow_sulfur) {
  double u = rng.uniform();
  if (u < 0.55)
    return "C";
  if (u < 0.75)
    return "N";
  if (u < 0.95 || !allow_sulfur)
    return "O";
  return "S";
}

Vec3 random_unit(Rng &rng) {
  Vec3 v;
  do {
    v = rng.normal3();
  } while (v.norm() < 1e-9);
  return v.normalized();
}

std::optional<RawLigand> grow_ligand(Rng &rng, const ToyConfig &cfg) {
  const int n = cfg.min_atoms
                + static_cast<int>(rng.index(cfg.max_atoms - cfg.min_atoms + 1));
  std::vector<Vec3> pos;
  std::vector<std::string> el;
  std::vector<std::vector<int>> adj;
  std::vector<Bond> bonds;
  auto add_bond = [&](int i, int j) {
    adj[i].push_back(j);
    adj[j].push_back(i);
    bonds.push_back({ i, j, 1, false, false });
  };

  if (n >= 8 && rng.bernoulli(cfg.ring_probability)) {
    for (int k = 0; k < 6; ++k) {
      double a = kTwoPi * k / 6.0;
      pos.emplace_back(cfg.bond_length * std::cos(a),
                       cfg.bond_length * std::sin(a), 0.0);
      el.push_back(random_element(rng, false));
      adj.emplace_back();
    }
    for (int k = 0; k < 6; ++k)
      add_bond(k, (k + 1) % 6);
  } else {
    pos.emplace_back(Vec3::Zero());
    el.push_back(random_element(rng, true));
    adj.emplace_back();
  }

  const double cos_min_angle = std::cos(100.0 * kPi / 180.0);
  const double near_min = 2.3;  // pairs two bonds apart
  int failures = 0;
  while (static_cast<int>(pos.size()) < n) {
    if (++failures > 2000)
      return std::nullopt;
    int parent = static_cast<int>(rng.index(pos.size()));
    if (adj[parent].size() >= 3)
      continue;
    Vec3 d = random_unit(rng);
    bool ok = true;
    for (int q: adj[parent])
      if (d.dot((pos[q] - pos[parent]).normalized()) > cos_min_angle) {
        ok = false;
        break;
      }
    if (!ok)
      continue;
    Vec3 p = pos[parent] + cfg.bond_length * d;
    for (std::size_t k = 0; k < pos.size() && ok; ++k) {
      if (static_cast<int>(k) == parent)
        continue;
      bool two_apart = std::find(adj[parent].begin(), adj[parent].end(),
                                 static_cast<int>(k))
                       != adj[parent].end();
      if ((p - pos[k]).norm() < (two_apart ? near_min : cfg.min_nonbonded))
        ok = false;
    }
    if (!ok)
      continue;
    pos.push_back(p);
    el.push_back(random_element(rng, true));
    adj.emplace_back();
    add_bond(parent, static_cast<int>(pos.size()) - 1);
  }

  // Terminal carbonyl-like double bonds.
  for (auto &b: bonds) {
    int leaf = adj[b.i].size() == 1 ? b.i : (adj[b.j].size() == 1 ? b.j : -1);
    if (leaf < 0)
      continue;
    int other = leaf == b.i ? b.j : b.i;
    if (el[leaf] == "O" && el[other] == "C" && rng.bernoulli(0.3))
      b.order = 2;
  }

  RawLigand out;
  out.elements = std::move(el);
  out.coords.resize(3, n);
  for (int i = 0; i < n; ++i)
    out.coords.col(i) = pos[i];
  out.bonds = std::move(bonds);
  return out;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    double z = 1.0 - 2.0 * (k + 0.5) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * k;
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

Residue make_residue(int number, const char *name, const Vec3 &ca,
                     int label) {
  Residue r;
  r.chain = "A";
  r.number = number;
  r.name = name;
  r.ca = ca;
  r.atom_names = { "CA" };
  r.elements = { "C" };
  r.atoms = ca;
  r.label = label;
  return r;
}

std::optional<SyntheticComplex> attempt(std::uint64_t seed, int index,
                                        const ToyConfig &cfg) {
  Rng rng(seed);
  std::optional<RawLigand> raw = grow_ligand(rng, cfg);
  if (!raw)
    return std::nullopt;
  LigandConformer lig(raw->elements, raw->coords, raw->bonds);
  const MolGraph &g = lig.graph();
  if (g.num_colors() != g.size() || lig.num_torsions() > cfg.max_rotatable)
    return std::nullopt;

  // Native pose: random orientation, centroid at c*.
  Vec3 center(rng.uniform(-cfg.box, cfg.box), rng.uniform(-cfg.box, cfg.box),
              rng.uniform(-cfg.box, cfg.box));
  Rotation3 orient = sample_rotation_uniform(rng);
  Coords local = orient.rotate(Coords(lig.coords().colwise()
                                      - centroid(lig.coords())));
  Coords native = local.colwise() + center;
  double r_lig = local.colwise().norm().maxCoeff();
  const double shell = r_lig + cfg.shell_gap;

  ProteinStructure protein;
  std::vector<Vec3> anchors;
  for (int i = 0; i < lig.size(); ++i) {
    Vec3 u = local.col(i);
    if (u.norm() < 1e-6)
      continue;
    anchors.push_back(center + shell * u.normalized());
    protein.residues.push_back(make_residue(
        static_cast<int>(protein.residues.size()) + 1, "ANC",
        anchors.back(), g.colors()[i]));
  }

  Vec3 aperture = random_unit(rng);
  const double cos_ap = std::cos(cfg.aperture_deg * kPi / 180.0);
  const int n_anchor = protein.num_residues();
  const double area_per_point = cfg.residue_spacing * cfg.residue_spacing
                                * std::sqrt(3.0) / 2.0;
  int n_fib = static_cast<int>(4.0 * kPi * shell * shell / area_per_point);
  std::vector<Vec3> kept;
  for (int iter = 0; iter < 50; ++iter) {
    kept.clear();
    for (const Vec3 &d: fibonacci_sphere(std::max(n_fib, 1))) {
      if (d.dot(aperture) > cos_ap)
        continue;
      Vec3 p = center + shell * d;
      bool clash = false;
      for (const Vec3 &a: anchors)
        if ((p - a).norm() < 0.8 * cfg.residue_spacing) {
          clash = true;
          break;
        }
      if (!clash)
        kept.push_back(p);
    }
    int total = n_anchor + static_cast<int>(kept.size());
    if (total > cfg.max_residues)
      n_fib = std::max(1, static_cast<int>(n_fib * 0.95) - 1);
    else if (total < cfg.min_residues)
      n_fib = static_cast<int>(n_fib * 1.05) + 1;
    else
      break;
  }
  for (const Vec3 &p: kept)
    protein.residues.push_back(make_residue(
        static_cast<int>(protein.residues.size()) + 1, "SHL", p, -1));
  if (protein.num_residues() < cfg.min_residues
      || protein.num_residues() > cfg.max_residues)
    return std::nullopt;

  ValidityReport rep = check_pose(native, g, protein.heavy_atoms(),
                                  protein.heavy_elements());
  if (rep.pass_count != 4)
    return std::nullopt;

  // Input conformer: native scrambled by a random rotation and torsions.
  LigandConformer nat = lig.with_coords(native);
  PoseTransform scramble;
  scramble.rot = sample_rotation_uniform(rng);
  for (const auto &rb: nat.rotatable_bonds())
    scramble.tor.push_back(sample_torsion_uniform(rng, rb.period));
  LigandConformer input = nat.with_coords(apply_pose(nat, scramble)).centered();

  SyntheticComplex out;
  char id[32];
  std::snprintf(id, sizeof id, "toy-%05d", index);
  out.record.id = id;
  out.record.protein = std::move(protein);
  out.record.ligand = std::move(input);
  out.record.native = native;
  out.record.pocket_center = center;
  out.record.metadata["source"] = "toysuite";
  out.record.metadata["rotatable_rule"] = kRotatableRuleVersion;
  out.native_center = center;
  out.shell_radius = shell;
  out.seed = seed;
  return out;
}

}  // namespace

SyntheticComplex generate_complex(std::uint64_t seed, int index,
                                  const ToyConfig &cfg) {
  if (cfg.min_atoms < 2 || cfg.max_atoms < cfg.min_atoms)
    throw DataError("toy config: invalid atom range");
  const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(index));
  for (int a = 0; a < cfg.retry_cap; ++a) {
    std::uint64_t s = derive_seed(base, static_cast<std::uint64_t>(a));
    if (auto c = attempt(s, index, cfg)) {
      c->record.metadata["generator_seed"] = std::to_string(seed);
      c->record.metadata["index"] = std::to_string(index);
      return std::move(*c);
    }
  }
  throw DataError("toy complex " + std::to_string(index)
                  + ": retry cap exceeded without a valid native pose");
}

std::vector<SyntheticComplex>
generate_corpus(std::uint64_t seed, int first, int n, const ToyConfig &cfg,
                std::vector<std::string> *warnings) {
  if (n < 1)
    throw DataError("generate_corpus: n must be >= 1");
  std::vector<std::optional<SyntheticComplex>> slots(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    try {
      slots[k] = generate_complex(seed, first + k, cfg);
    } catch (const std::exception &e) {
      errors[k] = e.what();
    }
  }
  std::vector<SyntheticComplex> out;
  for (int k = 0; k < n; ++k) {
    if (slots[k])
      out.push_back(std::move(*slots[k]));
    else if (warnings)
      warnings->push_back("skipped: " + errors[k]);
  }
  return out;
}

Coords make_decoy(const SyntheticComplex &c, double distance, double max_angle,
                  std::uint64_t seed) {
  Rng rng(seed);
  const Coords &nat = *c.record.native;
  Vec3 cen = centroid(nat);
  Vec3 shift = distance * random_unit(rng);
  Rotation3 r = Rotation3::from_axis_angle(random_unit(rng),
                                           rng.uniform(0.0, max_angle));
  return (r.matrix() * (nat.colwise() - cen)).colwise() + (cen + shift);
}

double anchor_alignment(const ComplexRecord &rec, const Coords &coords) {
  const auto &res = rec.protein.residues;
  Coords ca = rec.protein.ca_coords();
  Vec3 center = fit_sphere_center(ca);
  const auto &colors = rec.ligand.graph().colors();
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < rec.ligand.size(); ++i) {
    Vec3 acc = Vec3::Zero();
    int m = 0;
    for (std::size_t r = 0; r < res.size(); ++r)
      if (res[r].label == colors[i]) {
        acc += res[r].ca;
        ++m;
      }
    Vec3 u = coords.col(i) - center;
    if (m == 0 || u.norm() < 1e-9)
      continue;
    Vec3 w = (acc / m - center).normalized();
    sum += u.normalized().dot(w);
    ++count;
  }
  return count ? sum / count : 0.0;
}

}  // namespace fmdock
