//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/evalkit.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

namespace fmdock {

RmsdResult symmetry_rmsd(const Coords &pred, const Coords &ref,
                         const MolGraph &graph, std::size_t cap) {
  const int n = graph.size();
  if (pred.cols() != n || ref.cols() != n)
    throw DataError("symmetry_rmsd: atom count mismatch (pred "
                    + std::to_string(pred.cols()) + ", ref "
                    + std::to_string(ref.cols()) + ", graph "
                    + std::to_string(n) + ")");
  RmsdResult best;
  best.value = std::numeric_limits<double>::infinity();
  if (n == 0) {
    best.value = 0.0;
    return best;
  }
  AutomorphismCount c = enumerate_automorphisms(
      graph, {}, cap, [&](std::span<const int> perm) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          s += (pred.col(perm[i]) - ref.col(i)).squaredNorm();
        double v = std::sqrt(s / n);
        if (v < best.value) {
          best.value = v;
          best.automorphism.assign(perm.begin(), perm.end());
        }
        return true;
      });
  if (c.truncated) {
    best.truncated = true;
    best.automorphism.resize(n);
    std::iota(best.automorphism.begin(), best.automorphism.end(), 0);
    best.value = rmsd_no_fit(pred, ref);
  }
  return best;
}

namespace {

using ResKey = std::pair<std::string, int>;

bool near_ligand(const Vec3 &p, const Coords &lig, double r) {
  for (Eigen::Index i = 0; i < lig.cols(); ++i)
    if ((lig.col(i) - p).norm() <= r)
      return true;
  return false;
}

std::string primary_chain(const ProteinStructure &p, const Coords &lig,
                          double r) {
  std::map<std::string, int> count;
  for (const auto &res: p.residues)
    for (Eigen::Index a = 0; a < res.atoms.cols(); ++a)
      if (near_ligand(res.atoms.col(a), lig, r))
        ++count[res.chain];
  std::string best;
  int best_n = -1;
  for (const auto &ch: p.chains()) {
    int c = count.count(ch) ? count[ch] : 0;
    if (c > best_n) {
      best_n = c;
      best = ch;
    }
  }
  if (best_n <= 0)
    throw DataError("no protein atom within "
                    + std::to_string(r) + " A of the reference ligand");
  return best;
}

struct Fit {
  RigidTransform t;
  double rmsd;
};

Fit fit_pairs(const Coords &mobile, const Coords &target) {
  Fit f;
  f.t = kabsch_superpose(mobile, target);
  f.rmsd = rmsd_no_fit(f.t.apply(mobile), target);
  return f;
}

Coords gather(const std::vector<Vec3> &v, const std::vector<int> &idx) {
  Coords out(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = v[idx[k]];
  return out;
}

}  // namespace

AlignResult pocket_align_base(const ProteinStructure &ref,
                              const Coords &ref_ligand,
                              const ProteinStructure &pred,
                              const AlignOptions &opt) {
  if (pred.num_residues() == 0)
    throw DataError("pocket_align_base: empty predicted protein");
  const std::string chain = primary_chain(ref, ref_ligand, opt.pocket_radius);
  std::map<ResKey, Vec3> pred_ca;
  for (const auto &r: pred.residues)
    pred_ca.emplace(ResKey(r.chain, r.number), r.ca);

  std::vector<Vec3> mob, tgt;
  for (const auto &r: ref.residues) {
    if (r.chain != chain || !near_ligand(r.ca, ref_ligand, opt.pocket_radius))
      continue;
    auto it = pred_ca.find(ResKey(r.chain, r.number));
    if (it == pred_ca.end())
      continue;
    mob.push_back(r.ca);
    tgt.push_back(it->second);
  }
  if (mob.size() < 3)
    throw DataError("pocket_align_base: only " + std::to_string(mob.size())
                    + " matched CA pairs (need 3)");

  std::vector<int> keep(mob.size());
  std::iota(keep.begin(), keep.end(), 0);
  Fit fit = fit_pairs(gather(mob, keep), gather(tgt, keep));
  for (int cycle = 0; cycle < opt.refinement_cycles; ++cycle) {
    std::vector<int> next;
    for (int k: keep)
      if ((fit.t.apply(mob[k]) - tgt[k]).norm()
          <= opt.outlier_factor * fit.rmsd)
        next.push_back(k);
    if (next.size() == keep.size() || next.size() < 3)
      break;
    keep = std::move(next);
    fit = fit_pairs(gather(mob, keep), gather(tgt, keep));
  }
  AlignResult out;
  out.transform = fit.t;
  out.rmsd = fit.rmsd;
  out.pairs = static_cast<int>(keep.size());
  out.chain = chain;
  return out;
}

AlignResult pocket_align_pocketbased(const ProteinStructure &ref,
                                     const Coords &ref_ligand,
                                     const ProteinStructure &pred,
                                     const Coords &pred_ligand,
                                     const AlignOptions &opt) {
  std::map<int, Vec3> ref_pocket;
  for (const auto &r: ref.residues)
    if (near_ligand(r.ca, ref_ligand, opt.pocket_radius))
      ref_pocket.emplace(r.number, r.ca);

  AlignResult best;
  best.rmsd = std::numeric_limits<double>::infinity();
  std::size_t best_pairs = 0;
  for (const auto &chain: pred.chains()) {
    std::vector<Vec3> mob, tgt;
    for (const auto &r: pred.residues) {
      if (r.chain != chain || !near_ligand(r.ca, pred_ligand, opt.pocket_radius))
        continue;
      auto it = ref_pocket.find(r.number);
      if (it == ref_pocket.end())
        continue;
      mob.push_back(it->second);
      tgt.push_back(r.ca);
    }
    best_pairs = std::max(best_pairs, mob.size());
    if (mob.size() < 3)
      continue;
    std::vector<int> all(mob.size());
    std::iota(all.begin(), all.end(), 0);
    Fit f = fit_pairs(gather(mob, all), gather(tgt, all));
    if (f.rmsd < best.rmsd) {
      best.transform = f.t;
      best.rmsd = f.rmsd;
      best.pairs = static_cast<int>(mob.size());
      best.chain = chain;
    }
  }
  if (best.pairs < 3)
    throw DataError("pocket_align_pocketbased: only "
                    + std::to_string(best_pairs)
                    + " matched CA pairs in the best chain (need 3)");
  return best;
}

SuccessRates success_rates(std::span<const double> rmsd,
                           std::span<const ValidityReport> reports,
                           double threshold) {
  if (!reports.empty() && reports.size() != rmsd.size())
    throw DataError("success_rates: rmsd/report count mismatch");
  SuccessRates s;
  s.n = static_cast<int>(rmsd.size());
  if (s.n == 0)
    return s;
  int ok = 0, ok_valid = 0;
  for (std::size_t i = 0; i < rmsd.size(); ++i) {
    bool hit = std::isfinite(rmsd[i]) && rmsd[i] <= threshold;
    ok += hit;
    ok_valid += hit && !reports.empty() && reports[i].pass_count == 4;
  }
  s.rmsd_2a = static_cast<double>(ok) / s.n;
  s.rmsd_2a_valid = static_cast<double>(ok_valid) / s.n;
  return s;
}

}  // namespace fmdock
