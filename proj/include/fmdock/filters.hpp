//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fmdock/common.hpp"
#include "fmdock/graph.hpp"

namespace fmdock {

struct FilterThresholds {
  double c_min = 0.75;    // (i)   d >= c_min (r_i + r_j)
  double d_max = 5.0;     // (ii)  some contact within d_max Angstrom
  double s_vol = 0.8;     // (iii) radius scale for the overlap volume
  double f_max = 0.075;   // (iii) overlap / ligand volume <= f_max
  double c_clash = 0.80;  // (iv)  intramolecular, pairs > 2 bonds apart

  void validate() const;
};

struct ValidityReport {
  bool min_dist_ok = false;
  bool max_dist_ok = false;
  bool volume_overlap_ok = false;
  bool internal_clash_ok = false;
  int pass_count = 0;
  // Raw values; thresholds can be re-applied offline.
  double min_distance_ratio = 0.0;    // min d / (r_i + r_j), ligand-protein
  double nearest_contact = 0.0;       // Angstrom
  double overlap_fraction = 0.0;
  double worst_internal_ratio = 0.0;  // +inf when no pair is > 2 bonds apart

  /// Re-derives flags and pass_count from the raw values.
  static ValidityReport from_values(double min_ratio, double nearest,
                                    double overlap, double internal,
                                    const FilterThresholds &t);
};

/// Volume of the intersection of two balls at center distance d.
double lens_volume(double r1, double r2, double d);

/// Per-complex checker. Protein atoms are binned on a uniform grid whose
/// cell equals the search cutoff max(d_max, 2 r_max); every threshold
/// decision only involves pairs inside that cutoff. Measured ligand-protein
/// values are taken over pairs within the cutoff, or over all pairs when
/// the ligand has no atom within it.
class PoseChecker {
public:
  PoseChecker(const MolGraph &ligand, const Coords &protein,
              std::span<const std::string> protein_elements,
              FilterThresholds thresholds = {});

  ValidityReport check(const Coords &ligand) const;
  /// Brute-force reference with the same definitions.
  ValidityReport check_serial(const Coords &ligand) const;

  /// OpenMP over poses.
  std::vector<ValidityReport> check_batch(std::span<const Coords> poses) const;
  std::vector<ValidityReport>
  check_batch_serial(std::span<const Coords> poses) const;

  const FilterThresholds &thresholds() const { return t_; }
  double cutoff() const { return cutoff_; }

private:
  struct Accum {
    double min_ratio;
    double nearest;
    double overlap;
    bool any;
  };
  void visit_pair(int i, int j, double d, Accum &a) const;
  ValidityReport finish(const Coords &ligand, Accum a) const;
  Accum brute(const Coords &ligand) const;
  double internal_ratio(const Coords &ligand) const;

  FilterThresholds t_;
  std::vector<double> lig_r_;
  Coords prot_;
  std::vector<double> prot_r_;
  std::vector<std::pair<int, int>> internal_pairs_;
  double lig_volume_ = 0.0;
  double cutoff_ = 0.0;
  // Grid.
  Vec3 origin_ = Vec3::Zero();
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<int> cell_start_;
  std::vector<int> cell_atoms_;
};

/// One-shot convenience wrapper.
ValidityReport check_pose(const Coords &ligand, const MolGraph &graph,
                          const Coords &protein,
                          std::span<const std::string> protein_elements,
                          const FilterThresholds &t = {});

/// Indices whose pass_count equals the maximum, in input order.
std::vector<int> retain_best(std::span<const ValidityReport> reports);

}  // namespace fmdock
