//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "fmdock/elements.hpp"
#include "fmdock/filters.hpp"
#include "fmdock/toysuite.hpp"
#include "oracles.hpp"

namespace fmdock {
namespace {

double ball(double r) { return 4.0 / 3.0 * kPi * r * r * r; }

void expect_same_report(const ValidityReport &a, const ValidityReport &b,
                        double tol) {
  EXPECT_EQ(a.pass_count, b.pass_count);
  EXPECT_EQ(a.min_dist_ok, b.min_dist_ok);
  EXPECT_EQ(a.max_dist_ok, b.max_dist_ok);
  EXPECT_EQ(a.volume_overlap_ok, b.volume_overlap_ok);
  EXPECT_EQ(a.internal_clash_ok, b.internal_clash_ok);
  EXPECT_NEAR(a.min_distance_ratio, b.min_distance_ratio, tol);
  EXPECT_NEAR(a.nearest_contact, b.nearest_contact, tol);
  EXPECT_NEAR(a.overlap_fraction, b.overlap_fraction, tol);
  if (std::isinf(a.worst_internal_ratio))
    EXPECT_EQ(a.worst_internal_ratio, b.worst_internal_ratio);
  else
    EXPECT_NEAR(a.worst_internal_ratio, b.worst_internal_ratio, tol);
}

// Poses around a toy complex: native, small and large perturbations.
std::vector<Coords> pose_cloud(const SyntheticComplex &c, int n, std::uint64_t seed) {
  std::vector<Coords> out;
  for (int i = 0; i < n; ++i)
    out.push_back(make_decoy(c, 0.5 * i, 0.2 * i, seed + i));
  return out;
}

TEST(LensVolume, LimitingCases) {
  EXPECT_EQ(lens_volume(1.0, 2.0, 3.0), 0.0);
  EXPECT_EQ(lens_volume(1.0, 2.0, 7.0), 0.0);
  EXPECT_NEAR(lens_volume(1.0, 2.0, 0.5), ball(1.0), 1e-12);
  EXPECT_NEAR(lens_volume(1.5, 1.5, 0.0), ball(1.5), 1e-12);
  EXPECT_NEAR(lens_volume(1.2, 1.7, 1.1), lens_volume(1.7, 1.2, 1.1), 1e-14);
}

TEST(LensVolume, MatchesMonteCarlo) {
  Rng rng(1);
  for (auto [r1, r2, d]: { std::tuple { 1.0, 1.0, 1.0 }, std::tuple { 1.2, 1.7, 2.0 },
                           std::tuple { 1.52, 1.7, 0.9 }, std::tuple { 0.8, 2.0, 2.3 } }) {
    const double mc = oracle::monte_carlo_lens(r1, r2, d, 1000000, rng);
    EXPECT_NEAR(lens_volume(r1, r2, d), mc, 0.01 * mc) << r1 << " " << r2 << " " << d;
  }
}

TEST(LensVolume, DecreasesWithDistance) {
  double prev = lens_volume(1.4, 1.8, 0.0);
  for (double d = 0.05; d < 3.3; d += 0.05) {
    double v = lens_volume(1.4, 1.8, d);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
}

TEST(Thresholds, Validation) {
  FilterThresholds t;
  EXPECT_NO_THROW(t.validate());
  t.c_min = 0.0;
  EXPECT_THROW(t.validate(), DataError);
  t = {};
  t.f_max = -0.1;
  EXPECT_THROW(t.validate(), DataError);
}

TEST(PoseChecker, FarLigandFailsOnlyTheContactCheck) {
  auto c = generate_complex(3, 0);
  const auto &p = c.record.protein;
  Coords far = c.record.native->colwise() + Vec3(100.0, 100.0, 100.0);
  auto elems = p.heavy_elements();
  ValidityReport r = check_pose(far, c.record.ligand.graph(), p.heavy_atoms(), elems);
  EXPECT_TRUE(r.min_dist_ok);
  EXPECT_FALSE(r.max_dist_ok);
  EXPECT_TRUE(r.volume_overlap_ok);
  EXPECT_TRUE(r.internal_clash_ok);
  EXPECT_EQ(r.pass_count, 3);
  EXPECT_EQ(r.overlap_fraction, 0.0);
  EXPECT_GT(r.nearest_contact, 100.0);
}

TEST(PoseChecker, CoincidentAtomFailsMinimumDistance) {
  auto lig = oracle::chain4();
  Coords prot = lig.coords().col(2) + Vec3::Zero();
  std::vector<std::string> el = { "C" };
  PoseChecker pc(lig.graph(), prot, el);
  ValidityReport r = pc.check(lig.coords());
  EXPECT_EQ(r.min_distance_ratio, 0.0);
  EXPECT_FALSE(r.min_dist_ok);
  EXPECT_TRUE(r.max_dist_ok);
  EXPECT_EQ(r.nearest_contact, 0.0);
  // One carbon ball fully inside a ligand ball, scaled by s_vol.
  const double s = pc.thresholds().s_vol;
  double lig_vol = 0.0;
  for (const auto &e: lig.elements())
    lig_vol += ball(s * vdw_radius(e));
  EXPECT_GE(r.overlap_fraction, ball(s * vdw_radius("C")) / lig_vol - 1e-12);
}

TEST(PoseChecker, InternalClashUsesPairsBeyondTwoBonds) {
  auto lig = oracle::chain4();
  Coords x = lig.coords();
  Coords prot = Coords::Constant(3, 1, 50.0);
  std::vector<std::string> el = { "C" };
  PoseChecker pc(lig.graph(), prot, el);
  const double ratio = (x.col(0) - x.col(3)).norm() / (vdw_radius("C") + vdw_radius("O"));
  EXPECT_NEAR(pc.check(x).worst_internal_ratio, ratio, 1e-12);
  x.col(3) = x.col(0) + Vec3(0.5, 0, 0);
  EXPECT_FALSE(pc.check(x).internal_clash_ok);

  LigandConformer tri({ "C", "C", "C" }, lig.coords().leftCols(3), { { 0, 1, 1 }, { 1, 2, 1 } });
  PoseChecker pt(tri.graph(), prot, el);
  EXPECT_TRUE(std::isinf(pt.check(tri.coords()).worst_internal_ratio));
  EXPECT_TRUE(pt.check(tri.coords()).internal_clash_ok);
}

TEST(PoseChecker, InvariantUnderRigidMotion) {
  Rng rng(2);
  auto c = generate_complex(4, 1);
  const auto &p = c.record.protein;
  auto elems = p.heavy_elements();
  PoseChecker pc(c.record.ligand.graph(), p.heavy_atoms(), elems);
  for (const Coords &x: pose_cloud(c, 8, 40)) {
    const Mat3 g = oracle::random_rotation_matrix(rng);
    const Vec3 t = rng.normal3(20.0);
    PoseChecker moved(c.record.ligand.graph(), (g * p.heavy_atoms()).colwise() + t, elems);
    expect_same_report(pc.check(x), moved.check((g * x).colwise() + t), 1e-9);
  }
}

TEST(PoseChecker, GridMatchesBruteForce) {
  for (int idx = 0; idx < 6; ++idx) {
    auto c = generate_complex(9, idx);
    const auto &p = c.record.protein;
    auto elems = p.heavy_elements();
    PoseChecker pc(c.record.ligand.graph(), p.heavy_atoms(), elems);
    auto poses = pose_cloud(c, 15, 100 + idx);
    auto a = pc.check_batch(poses), b = pc.check_batch_serial(poses);
    ASSERT_EQ(a.size(), poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
      expect_same_report(a[i], b[i], 1e-9);
      expect_same_report(pc.check(poses[i]), pc.check_serial(poses[i]), 1e-9);
    }
  }
}

TEST(PoseChecker, NativePoseOfToyComplexPassesEverything) {
  for (int idx = 0; idx < 10; ++idx) {
    auto c = generate_complex(12, idx);
    const auto &p = c.record.protein;
    auto elems = p.heavy_elements();
    EXPECT_EQ(check_pose(*c.record.native, c.record.ligand.graph(), p.heavy_atoms(),
                         elems)
                  .pass_count,
              4);
  }
}

TEST(ValidityReport, FromValuesAndMonotoneThresholds) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double mr = rng.uniform(0.0, 1.5), nc = rng.uniform(0.0, 9.0);
    const double ov = rng.uniform(0.0, 0.2), in = rng.uniform(0.3, 1.5);
    FilterThresholds loose;
    FilterThresholds strict = loose;
    strict.c_min += rng.uniform(0.0, 0.3);
    strict.d_max -= rng.uniform(0.0, 3.0);
    strict.f_max -= rng.uniform(0.0, 0.07);
    strict.c_clash += rng.uniform(0.0, 0.3);
    auto a = ValidityReport::from_values(mr, nc, ov, in, loose);
    auto b = ValidityReport::from_values(mr, nc, ov, in, strict);
    EXPECT_LE(b.pass_count, a.pass_count);
    EXPECT_EQ(a.pass_count, a.min_dist_ok + a.max_dist_ok + a.volume_overlap_ok
                                + a.internal_clash_ok);
    EXPECT_EQ(a.min_dist_ok, mr >= loose.c_min);
    EXPECT_EQ(a.max_dist_ok, nc <= loose.d_max);
    EXPECT_EQ(a.volume_overlap_ok, ov <= loose.f_max);
    EXPECT_EQ(a.internal_clash_ok, in >= loose.c_clash);
  }
}

ValidityReport with_count(int k) {
  ValidityReport r;
  r.pass_count = k;
  return r;
}

TEST(RetainBest, Examples) {
  std::vector<ValidityReport> r = { with_count(3), with_count(4), with_count(4),
                                    with_count(2) };
  EXPECT_EQ(retain_best(r), (std::vector<int> { 1, 2 }));
  r = { with_count(1), with_count(1) };
  EXPECT_EQ(retain_best(r), (std::vector<int> { 0, 1 }));
  EXPECT_TRUE(retain_best({}).empty());
}

TEST(RetainBest, MatchesBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ValidityReport> r;
    const int n = 1 + static_cast<int>(rng.index(20));
    for (int i = 0; i < n; ++i)
      r.push_back(with_count(static_cast<int>(rng.index(5))));
    int best = -1;
    for (const auto &x: r)
      best = std::max(best, x.pass_count);
    std::vector<int> want;
    for (int i = 0; i < n; ++i)
      if (r[i].pass_count == best)
        want.push_back(i);
    EXPECT_EQ(retain_best(r), want);
  }
}

}  // namespace
}  // namespace fmdock
