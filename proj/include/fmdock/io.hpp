//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fmdock/complex.hpp"
#include "fmdock/evalkit.hpp"
#include "fmdock/flowmatch.hpp"
#include "fmdock/scorer.hpp"
#include "fmdock/velocity_net.hpp"

namespace fmdock {

using json = nlohmann::json;

// ---- files ---------------------------------------------------------------

std::string read_text_file(const std::string &path);
/// Writes `path.tmp-<pid>` and renames it over `path`.
void write_file_atomic(const std::string &path, std::string_view content);

// ---- JSON ------------------------------------------------------------------
//
// Non-finite numbers are written as the strings "inf", "-inf", "nan".

json number_to_json(double v);
double number_from_json(const json &j);

json coords_to_json(const Coords &x);
Coords coords_from_json(const json &j);

json pose_to_json(const PoseTransform &p);
PoseTransform pose_from_json(const json &j);

json report_to_json(const ValidityReport &r);
/// Flags are re-derived from the raw values under `t`.
ValidityReport report_from_json(const json &j, const FilterThresholds &t = {});

json protein_to_json(const ProteinStructure &p);
ProteinStructure protein_from_json(const json &j);

json ligand_to_json(const LigandConformer &l);
LigandConformer ligand_from_json(const json &j);

json complex_to_json(const ComplexRecord &c);
ComplexRecord complex_from_json(const json &j);

json poseset_to_json(const PoseSet &p);
PoseSet poseset_from_json(const json &j);

/// Stable text form: 2-space indent, trailing newline.
std::string dump(const json &j);

// ---- structure files -------------------------------------------------------

/// ATOM/HETATM records, fixed columns (x/y/z in 31-54). Hydrogens and
/// alternate locations other than ' ' or 'A' are dropped; residues without
/// CA are skipped with a warning.
ProteinStructure parse_pdb_min(std::string_view text,
                               std::vector<std::string> *warnings = nullptr);
std::string write_pdb(const ProteinStructure &p);

/// First molecule of a V2000 MOL/SDF block. Hydrogens are dropped.
LigandConformer parse_sdf_min(std::string_view text);
std::string write_sdf(const LigandConformer &lig, const Coords &coords,
                      const std::string &name = "fmdock");

// ---- run configuration -----------------------------------------------------

struct RunConfig {
  StageConfig stage;
  AugmentConfig augment;
  LossWeights loss;
  int train_steps = 2000;
  int batch_size = 16;
  std::uint64_t train_seed = 1;
  ad::OptimizerConfig optimizer;
  NetArch net;
  FilterThresholds filters;
  int n_steps = 10;
  int n_samples = 40;
  std::uint64_t sample_seed = 0;
  int scorer_epochs = 60;
  int scorer_poses = 24;
  int scorer_hidden = 16;
  double scorer_learning_rate = 3e-3;
  std::uint64_t scorer_seed = 7;
};

/// TOML subset: `[section]` headers, `key = value` with numbers, booleans
/// and double-quoted strings, `#` comments. Unknown keys are errors.
RunConfig parse_run_config(std::string_view text);
json run_config_to_json(const RunConfig &c);
std::string run_config_to_toml(const RunConfig &c);
/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig &c);
std::string fnv1a_hex(std::string_view data);

// ---- checkpoints -----------------------------------------------------------

json velocity_checkpoint(const ToyVelocityNet &net, int stage,
                         const std::string &config_hash);
ToyVelocityNet velocity_from_checkpoint(const json &j, int *stage = nullptr);

json scorer_checkpoint(const Scorer &s, const std::string &config_hash);
Scorer scorer_from_checkpoint(const json &j);

}  // namespace fmdock
