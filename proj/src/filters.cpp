//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/filters.hpp"

#include <algorithm>
#include <limits>

#include "fmdock/elements.hpp"

namespace fmdock {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ball_volume(double r) {
  return 4.0 / 3.0 * kPi * r * r * r;
}

}  // namespace

void FilterThresholds::validate() const {
  if (!(c_min > 0.0) || !(d_max > 0.0) || !(s_vol > 0.0) || f_max < 0.0
      || !(c_clash > 0.0))
    throw DataError("filter thresholds must be positive (f_max >= 0)");
}

ValidityReport ValidityReport::from_values(double min_ratio, double nearest,
                                           double overlap, double internal,
                                           const FilterThresholds &t) {
  ValidityReport r;
  r.min_distance_ratio = min_ratio;
  r.nearest_contact = nearest;
  r.overlap_fraction = overlap;
  r.worst_internal_ratio = internal;
  r.min_dist_ok = min_ratio >= t.c_min;
  r.max_dist_ok = nearest <= t.d_max;
  r.volume_overlap_ok = overlap <= t.f_max;
  r.internal_clash_ok = internal >= t.c_clash;
  r.pass_count = r.min_dist_ok + r.max_dist_ok + r.volume_overlap_ok
                 + r.internal_clash_ok;
  return r;
}

double lens_volume(double r1, double r2, double d) {
  if (d >= r1 + r2)
    return 0.0;
  if (d <= std::abs(r1 - r2))
    return ball_volume(std::min(r1, r2));
  double s = r1 + r2 - d;
  return kPi * s * s
         * (d * d + 2.0 * d * (r1 + r2) - 3.0 * (r1 - r2) * (r1 - r2))
         / (12.0 * d);
}

PoseChecker::PoseChecker(const MolGraph &ligand, const Coords &protein,
                         std::span<const std::string> protein_elements,
                         FilterThresholds thresholds)
    : t_(thresholds), prot_(protein) {
  t_.validate();
  if (ligand.size() == 0)
    throw DataError("PoseChecker: empty ligand");
  if (static_cast<Eigen::Index>(protein_elements.size()) != protein.cols())
    throw DataError("PoseChecker: protein element count mismatch");
  if (protein.cols() == 0)
    throw DataError("PoseChecker: empty protein");

  double r_max = 0.0;
  for (const auto &e: ligand.elements()) {
    lig_r_.push_back(vdw_radius(e));
    r_max = std::max(r_max, lig_r_.back());
    lig_volume_ += ball_volume(t_.s_vol * lig_r_.back());
  }
  for (const auto &e: protein_elements) {
    prot_r_.push_back(vdw_radius(e));
    r_max = std::max(r_max, prot_r_.back());
  }
  for (int i = 0; i < ligand.size(); ++i) {
    std::vector<int> d = ligand.bfs_distances(i);
    for (int j = i + 1; j < ligand.size(); ++j)
      if (d[j] > 2)
        internal_pairs_.emplace_back(i, j);
  }

  cutoff_ = std::max(t_.d_max, 2.0 * r_max * std::max(1.0, t_.s_vol));
  Vec3 lo = protein.rowwise().minCoeff();
  Vec3 hi = protein.rowwise().maxCoeff();
  origin_ = lo;
  Vec3 span = (hi - lo) / cutoff_;
  nx_ = static_cast<int>(span.x()) + 1;
  ny_ = static_cast<int>(span.y()) + 1;
  nz_ = static_cast<int>(span.z()) + 1;
  const std::size_t ncell = static_cast<std::size_t>(nx_) * ny_ * nz_;
  std::vector<int> cell_of(protein.cols());
  std::vector<int> counts(ncell + 1, 0);
  for (Eigen::Index a = 0; a < protein.cols(); ++a) {
    Vec3 f = (protein.col(a) - origin_) / cutoff_;
    int cx = std::min(static_cast<int>(f.x()), nx_ - 1);
    int cy = std::min(static_cast<int>(f.y()), ny_ - 1);
    int cz = std::min(static_cast<int>(f.z()), nz_ - 1);
    cell_of[a] = (cz * ny_ + cy) * nx_ + cx;
    ++counts[cell_of[a] + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c)
    counts[c + 1] += counts[c];
  cell_start_ = counts;
  cell_atoms_.resize(protein.cols());
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  for (Eigen::Index a = 0; a < protein.cols(); ++a)
    cell_atoms_[fill[cell_of[a]]++] = static_cast<int>(a);
}

void PoseChecker::visit_pair(int i, int j, double d, Accum &a) const {
  a.any = true;
  a.min_ratio = std::min(a.min_ratio, d / (lig_r_[i] + prot_r_[j]));
  a.nearest = std::min(a.nearest, d);
  a.overlap += lens_volume(t_.s_vol * lig_r_[i], t_.s_vol * prot_r_[j], d);
}

PoseChecker::Accum PoseChecker::brute(const Coords &ligand) const {
  Accum a { kInf, kInf, 0.0, false };
  for (Eigen::Index i = 0; i < ligand.cols(); ++i)
    for (Eigen::Index j = 0; j < prot_.cols(); ++j)
      visit_pair(static_cast<int>(i), static_cast<int>(j),
                 (ligand.col(i) - prot_.col(j)).norm(), a);
  return a;
}

double PoseChecker::internal_ratio(const Coords &ligand) const {
  double worst = kInf;
  for (auto [i, j]: internal_pairs_)
    worst = std::min(worst, (ligand.col(i) - ligand.col(j)).norm()
                                / (lig_r_[i] + lig_r_[j]));
  return worst;
}

ValidityReport PoseChecker::finish(const Coords &ligand, Accum a) const {
  if (!a.any)
    a = brute(ligand);
  return ValidityReport::from_values(a.min_ratio, a.nearest,
                                     a.overlap / lig_volume_,
                                     internal_ratio(ligand), t_);
}

ValidityReport PoseChecker::check(const Coords &ligand) const {
  if (ligand.cols() != static_cast<Eigen::Index>(lig_r_.size()))
    throw DataError("PoseChecker: ligand atom count mismatch");
  Accum within { kInf, kInf, 0.0, false };
  for (Eigen::Index i = 0; i < ligand.cols(); ++i) {
    Vec3 f = (ligand.col(i) - origin_) / cutoff_;
    // Atoms more than one cell outside the grid have no neighbors.
    if (!f.allFinite() || f.minCoeff() < -1.0 || f.x() >= nx_ + 1.0
        || f.y() >= ny_ + 1.0 || f.z() >= nz_ + 1.0)
      continue;
    int cx = static_cast<int>(std::floor(f.x()));
    int cy = static_cast<int>(std::floor(f.y()));
    int cz = static_cast<int>(std::floor(f.z()));
    for (int z = std::max(cz - 1, 0); z <= std::min(cz + 1, nz_ - 1); ++z)
      for (int y = std::max(cy - 1, 0); y <= std::min(cy + 1, ny_ - 1); ++y)
        for (int x = std::max(cx - 1, 0); x <= std::min(cx + 1, nx_ - 1);
             ++x) {
          int c = (z * ny_ + y) * nx_ + x;
          for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            int j = cell_atoms_[k];
            double d = (ligand.col(i) - prot_.col(j)).norm();
            if (d <= cutoff_)
              visit_pair(static_cast<int>(i), j, d, within);
          }
        }
  }
  return finish(ligand, within);
}

ValidityReport PoseChecker::check_serial(const Coords &ligand) const {
  if (ligand.cols() != static_cast<Eigen::Index>(lig_r_.size()))
    throw DataError("PoseChecker: ligand atom count mismatch");
  Accum within { kInf, kInf, 0.0, false };
  for (Eigen::Index i = 0; i < ligand.cols(); ++i)
    for (Eigen::Index j = 0; j < prot_.cols(); ++j) {
      double d = (ligand.col(i) - prot_.col(j)).norm();
      if (d <= cutoff_)
        visit_pair(static_cast<int>(i), static_cast<int>(j), d, within);
    }
  return finish(ligand, within);
}

std::vector<ValidityReport>
PoseChecker::check_batch(std::span<const Coords> poses) const {
  std::vector<ValidityReport> out(poses.size());
  const auto n = static_cast<std::ptrdiff_t>(poses.size());
  std::vector<std::string> errors(poses.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    try {
      out[p] = check(poses[p]);
    } catch (const std::exception &e) {
      errors[p] = e.what();
    }
  }
  for (const auto &e: errors)
    if (!e.empty())
      throw DataError(e);
  return out;
}

std::vector<ValidityReport>
PoseChecker::check_batch_serial(std::span<const Coords> poses) const {
  std::vector<ValidityReport> out;
  out.reserve(poses.size());
  for (const Coords &p: poses)
    out.push_back(check_serial(p));
  return out;
}

ValidityReport check_pose(const Coords &ligand, const MolGraph &graph,
                          const Coords &protein,
                          std::span<const std::string> protein_elements,
                          const FilterThresholds &t) {
  return PoseChecker(graph, protein, protein_elements, t).check(ligand);
}

std::vector<int> retain_best(std::span<const ValidityReport> reports) {
  int best = -1;
  for (const auto &r: reports)
    best = std::max(best, r.pass_count);
  std::vector<int> out;
  for (std::size_t i = 0; i < reports.size(); ++i)
    if (reports[i].pass_count == best)
      out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace fmdock
