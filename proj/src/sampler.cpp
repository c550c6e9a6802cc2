//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "fmdock/sampler.hpp"

#include <sstream>
#include <string>

#include "fmdock/rng.hpp"
#include "fmdock/velocity_net.hpp"

namespace fmdock {

namespace {

std::string describe(const PoseTransform &x) {
  std::ostringstream os;
  os.precision(17);
  os << "tr=(" << x.tr.x() << ", " << x.tr.y() << ", " << x.tr.z()
     << ") rot=(" << x.rot.w() << ", " << x.rot.x() << ", " << x.rot.y()
     << ", " << x.rot.z() << ") tor=[";
  for (std::size_t k = 0; k < x.tor.size(); ++k)
    os << (k ? ", " : "") << x.tor[k].theta;
  os << "]";
  return os.str();
}

bool finite(const Velocity &v) {
  return v.tr.allFinite() && v.rot.k.allFinite() && v.tor.allFinite();
}

}  // namespace

VelocityField make_field(const ToyVelocityNet &net,
                         const DockingContext &ctx) {
  return [&net, &ctx](const PoseTransform &x, double t) {
    return net.predict(ctx, x, t);
  };
}

PoseTransform euler_rollout(const VelocityField &field,
                            const PoseTransform &initial, int n_steps) {
  if (n_steps < 1)
    throw DataError("euler_rollout: n_steps must be >= 1");
  if (!field)
    throw DataError("euler_rollout: missing velocity field");
  PoseTransform x = initial;
  const double h = 1.0 / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const double t = i * h;
    Velocity v = field(x, t);
    if (static_cast<std::size_t>(v.tor.size()) != x.tor.size())
      throw DataError("euler_rollout: field returned "
                      + std::to_string(v.tor.size()) + " torsion rates for "
                      + std::to_string(x.tor.size()) + " torsions");
    if (!finite(v))
      throw NumericError("non-finite velocity at step " + std::to_string(i)
                         + " (t=" + std::to_string(t)
                         + "), pose: " + describe(x));
    x.tr += h * v.tr;
    x.rot = x.rot * Rotation3::exp(h * v.rot.k);
    for (std::size_t k = 0; k < x.tor.size(); ++k)
      x.tor[k] = Torsion(x.tor[k].theta + h * v.tor[static_cast<Eigen::Index>(k)],
                         x.tor[k].period);
  }
  return x;
}

void RolloutConfig::validate() const {
  if (n_steps < 1)
    throw DataError("n_steps must be >= 1");
  if (n_samples < 1)
    throw DataError("n_samples must be >= 1");
  if (!(sigma_large > 0.0))
    throw DataError("sigma_large must be positive");
}

std::vector<PoseTransform>
staged_inference(const LigandConformer &lig, const Vec3 &protein_center,
                 const std::array<VelocityField, 3> &fields,
                 const RolloutConfig &cfg) {
  cfg.validate();
  const bool pocket = cfg.pocket_center.has_value();
  if ((!pocket && !fields[0]) || !fields[1] || !fields[2])
    throw DataError(std::string("staged_inference: missing stage ")
                    + (!pocket && !fields[0] ? "1" : (!fields[1] ? "2" : "3"))
                    + " model");

  const Vec3 origin = centroid(lig.coords());
  const int n = cfg.n_samples;
  std::vector<PoseTransform> out(n);
  std::vector<std::string> errors(n);
  std::vector<char> numeric(n, 0);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const auto si = static_cast<std::uint64_t>(i);
      Vec3 tr;
      if (pocket) {
        tr = *cfg.pocket_center - origin;
      } else {
        Rng r1(derive_seed(cfg.seed, si, 1));
        PoseTransform x0;
        x0.tr = protein_center - origin + r1.normal3(cfg.sigma_large);
        x0.rot = sample_rotation_uniform(r1);
        for (const auto &rb: lig.rotatable_bonds())
          x0.tor.push_back(sample_torsion_uniform(r1, rb.period));
        tr = euler_rollout(fields[0], x0, cfg.n_steps).tr;
      }
      Rng r2(derive_seed(cfg.seed, si, 2));
      PoseTransform x;
      x.tr = tr;
      x.rot = sample_rotation_uniform(r2);
      for (const auto &rb: lig.rotatable_bonds())
        x.tor.push_back(sample_torsion_uniform(r2, rb.period));
      x = euler_rollout(fields[1], x, cfg.n_steps);
      out[i] = euler_rollout(fields[2], x, cfg.n_steps);
    } catch (const NumericError &e) {
      errors[i] = e.what();
      numeric[i] = 1;
    } catch (const std::exception &e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) {
      std::string msg = "sample " + std::to_string(i) + ": " + errors[i];
      if (numeric[i])
        throw NumericError(msg);
      throw DataError(msg);
    }
  return out;
}

}  // namespace fmdock
