//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fmdock/flowmatch.hpp"
#include "fmdock/ligand.hpp"

namespace fmdock {

class DockingContext;
class ToyVelocityNet;

/// v(x, t). Must be safe to call concurrently.
using VelocityField = std::function<Velocity(const PoseTransform &, double)>;

VelocityField make_field(const ToyVelocityNet &net, const DockingContext &ctx);

/// Explicit Euler on R^3 x SO(3) x T^m with t_i = i / n_steps:
///   tr <- tr + h v_tr, rot <- rot exp(h v_rot), tor <- wrap(tor + h v_tor).
/// Throws NumericError (with the current pose) on a non-finite velocity.
PoseTransform euler_rollout(const VelocityField &field,
                            const PoseTransform &initial, int n_steps);

struct RolloutConfig {
  int n_steps = 10;
  int n_samples = 40;
  std::uint64_t seed = 0;
  double sigma_large = 15.0;
  // Pocket-aware mode: stage 1 is skipped and tr starts here.
  std::optional<Vec3> pocket_center;

  void validate() const;
};

/// Coarse-to-fine rollout. Sample i draws stage-1 noise from stream
/// (seed, i, 1) and stage-2 angles from stream (seed, i, 2), so blind and
/// pocket-aware runs share their angular draws. Stage 1 keeps only tr;
/// stage 2 restarts rot/tor uniformly; stage 3 refines the full pose.
/// `fields[0]` may be empty in pocket-aware mode.
std::vector<PoseTransform>
staged_inference(const LigandConformer &lig, const Vec3 &protein_center,
                 const std::array<VelocityField, 3> &fields,
                 const RolloutConfig &cfg);

}  // namespace fmdock
