//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "fmdock/io.hpp"
#include "fmdock/toysuite.hpp"
#include "oracles.hpp"

namespace fmdock {
namespace {

std::string fixture(const std::string &name) {
  return read_text_file(std::string(FMDOCK_TEST_DATA) + "/" + name);
}

TEST(Pdb, MinimalParserKeepsFirstModelHeavyAtoms) {
  std::vector<std::string> warn;
  ProteinStructure p = parse_pdb_min(fixture("mini.pdb"), &warn);
  ASSERT_EQ(p.num_residues(), 3);
  EXPECT_EQ(p.chains(), (std::vector<std::string> { "A", "B" }));
  const Residue &ala = p.residues[0];
  EXPECT_EQ(ala.name, "ALA");
  EXPECT_EQ(ala.number, 1);
  // altLoc A kept, B dropped; hydrogen dropped.
  EXPECT_EQ(ala.atoms.cols(), 5);
  EXPECT_LT((ala.ca - Vec3(1.458, 0.0, 0.0)).norm(), 1e-12);
  EXPECT_EQ(p.residues[2].chain, "B");
  EXPECT_EQ(p.residues[2].elements.back(), "O");
  // The water has no CA.
  ASSERT_EQ(warn.size(), 1u);
  EXPECT_NE(warn[0].find("HOH"), std::string::npos);
}

TEST(Pdb, RoundTrip) {
  ProteinStructure p = parse_pdb_min(fixture("mini.pdb"));
  ProteinStructure q = parse_pdb_min(write_pdb(p));
  ASSERT_EQ(q.num_residues(), p.num_residues());
  for (int i = 0; i < p.num_residues(); ++i) {
    EXPECT_EQ(q.residues[i].atom_names, p.residues[i].atom_names);
    EXPECT_EQ(q.residues[i].elements, p.residues[i].elements);
    EXPECT_LT((q.residues[i].atoms - p.residues[i].atoms).cwiseAbs().maxCoeff(), 5e-4);
  }
}

TEST(Pdb, Errors) {
  std::vector<std::string> warn;
  EXPECT_EQ(parse_pdb_min("", &warn).num_residues(), 0);
  EXPECT_FALSE(warn.empty());
  EXPECT_THROW(parse_pdb_min("ATOM      1  CA  ALA A   1       1.000"), DataError);
  EXPECT_THROW(parse_pdb_min("ATOM      1  CA  ALA A   1       1.000   abc     0.000  1.00 "
                             "0.00           C"),
               DataError);
}

TEST(Sdf, MinimalParserDropsHydrogens) {
  LigandConformer l = parse_sdf_min(fixture("mini.sdf"));
  EXPECT_EQ(l.elements(), (std::vector<std::string> { "C", "C", "O", "Cl" }));
  EXPECT_EQ(l.bonds().size(), 3u);
  EXPECT_LT((l.coords().col(3) - Vec3(-0.6, -1.6, 0.2)).norm(), 1e-12);
}

TEST(Sdf, RoundTrip) {
  LigandConformer l = parse_sdf_min(fixture("mini.sdf"));
  LigandConformer m = parse_sdf_min(write_sdf(l, l.coords(), "copy"));
  EXPECT_EQ(m.elements(), l.elements());
  ASSERT_EQ(m.bonds().size(), l.bonds().size());
  for (std::size_t b = 0; b < l.bonds().size(); ++b) {
    EXPECT_EQ(m.bonds()[b].i, l.bonds()[b].i);
    EXPECT_EQ(m.bonds()[b].j, l.bonds()[b].j);
    EXPECT_EQ(m.bonds()[b].order, l.bonds()[b].order);
  }
  EXPECT_LT((m.coords() - l.coords()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Sdf, Errors) {
  EXPECT_THROW(parse_sdf_min(fixture("bad_counts.sdf")), DataError);
  EXPECT_THROW(parse_sdf_min(fixture("bad_v3000.sdf")), DataError);
  EXPECT_THROW(parse_sdf_min(fixture("bad_element.sdf")), DataError);
  auto l = oracle::chain4();
  EXPECT_THROW(write_sdf(l, l.coords().leftCols(2)), DataError);
}

TEST(Json, NonFiniteNumbers) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(number_to_json(inf), "inf");
  EXPECT_EQ(number_to_json(-inf), "-inf");
  EXPECT_EQ(number_from_json(number_to_json(inf)), inf);
  EXPECT_TRUE(std::isnan(number_from_json(number_to_json(std::nan("")))));
  EXPECT_EQ(number_from_json(json(2.5)), 2.5);
  EXPECT_THROW(number_from_json(json("many")), DataError);
}

TEST(Json, PoseRoundTripIsExact) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    PoseTransform p;
    p.tr = rng.normal3(5.0);
    p.rot = sample_rotation_uniform(rng);
    p.tor = { sample_torsion_uniform(rng, kTwoPi), sample_torsion_uniform(rng, kPi) };
    PoseTransform q = pose_from_json(json::parse(dump(pose_to_json(p))));
    EXPECT_EQ(q.tr, p.tr);
    EXPECT_EQ(q.rot.quaternion(), p.rot.quaternion());
    ASSERT_EQ(q.tor.size(), 2u);
    EXPECT_EQ(q.tor[1].theta, p.tor[1].theta);
    EXPECT_EQ(q.tor[1].period, p.tor[1].period);
  }
}

TEST(Json, ComplexRoundTripIsByteStable) {
  auto c = generate_complex(2, 4);
  c.record.pocket_center = Vec3(1.0, 2.0, 3.0);
  c.record.metadata["source"] = "unit";
  const std::string a = dump(complex_to_json(c.record));
  ComplexRecord back = complex_from_json(json::parse(a));
  EXPECT_EQ(dump(complex_to_json(back)), a);
  EXPECT_EQ(back.ligand.num_torsions(), c.record.ligand.num_torsions());
  EXPECT_EQ(*back.native, *c.record.native);
}

TEST(Json, ComplexSchemaChecks) {
  auto c = generate_complex(2, 5);
  json j = complex_to_json(c.record);
  json wrong = j;
  wrong["kind"] = "poseset";
  EXPECT_THROW(complex_from_json(wrong), DataError);
  wrong = j;
  wrong["schema_version"] = kSchemaVersion + 1;
  EXPECT_THROW(complex_from_json(wrong), DataError);
  wrong = j;
  wrong["native"] = coords_to_json(Coords::Zero(3, 1));
  EXPECT_THROW(complex_from_json(wrong), DataError);
  wrong = j;
  wrong.erase("protein");
  EXPECT_THROW(complex_from_json(wrong), DataError);
}

TEST(Json, PoseSetRoundTrip) {
  auto c = generate_complex(2, 6);
  PoseSet s;
  s.complex_id = c.record.id;
  s.config_hash = "abc";
  s.seed = 42;
  for (int i = 0; i < 3; ++i) {
    PoseEntry e;
    e.coords = make_decoy(c, i, 0.1 * i, i);
    e.pose = PoseTransform::identity(c.record.ligand);
    if (i != 1)
      e.score = 0.5 * i;
    e.report = ValidityReport::from_values(1.0, 3.0, 0.0,
                                           std::numeric_limits<double>::infinity(), {});
    s.poses.push_back(e);
  }
  s.retained = std::vector<int> { 0, 2 };
  s.selected = 2;
  const std::string a = dump(poseset_to_json(s));
  PoseSet b = poseset_from_json(json::parse(a));
  EXPECT_EQ(dump(poseset_to_json(b)), a);
  EXPECT_FALSE(b.poses[1].score.has_value());
  EXPECT_EQ(b.poses[0].report->pass_count, 4);
  EXPECT_TRUE(std::isinf(b.poses[0].report->worst_internal_ratio));

  PoseSet crashed;
  crashed.complex_id = "x";
  crashed.error = "non-finite velocity";
  PoseSet back = poseset_from_json(poseset_to_json(crashed));
  EXPECT_EQ(back.error, crashed.error);
  EXPECT_TRUE(back.poses.empty());
}

TEST(Config, DefaultsAndOverrides) {
  RunConfig d = parse_run_config("");
  EXPECT_EQ(d.stage.sigma_large, 15.0);
  EXPECT_EQ(d.stage.sigma_medium, 5.0);
  EXPECT_EQ(d.stage.sigma_small, 1.0);
  EXPECT_EQ(d.loss.w_tor, 3.0);
  EXPECT_EQ(d.n_steps, 10);
  EXPECT_EQ(d.n_samples, 40);
  EXPECT_EQ(d.augment.coord_noise, 0.25);
  EXPECT_EQ(d.augment.mask_rate, 0.15);
  RunConfig c = parse_run_config(
      "# comment\n[train]\nsteps = 12 # trailing\noptimizer = \"sgd_momentum\"\n"
      "[filters]\nc_min = 0.7\n[augment]\nenabled = false\n");
  EXPECT_EQ(c.train_steps, 12);
  EXPECT_EQ(c.optimizer.kind, ad::OptimizerConfig::Kind::SgdMomentum);
  EXPECT_EQ(c.filters.c_min, 0.7);
  EXPECT_FALSE(c.augment.enabled);
}

TEST(Config, ErrorsNameTheLine) {
  auto message = [](const char *text) {
    try {
      parse_run_config(text);
    } catch (const DataError &e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("[train]\n\nstepz = 3\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("[train]\nsteps = \"x\"\n").find("line 2"), std::string::npos);
  EXPECT_FALSE(message("[stage]\nsigma_medium = 50\n").empty());
  EXPECT_FALSE(message("[augment]\nmask_rate = 1.0\n").empty());
  EXPECT_FALSE(message("[train\nsteps = 1\n").empty());
}

TEST(Config, TomlRoundTripAndHash) {
  RunConfig c = parse_run_config("[rollout]\nn_samples = 7\n[net]\nseed = 99\n");
  RunConfig back = parse_run_config(run_config_to_toml(c));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  RunConfig other = c;
  other.n_samples = 8;
  EXPECT_NE(config_hash(other), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Hash, Fnv1aReferenceValues) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Checkpoint, VelocityNetRoundTrip) {
  NetArch arch;
  arch.atom_hidden = 5;
  arch.seed = 3;
  ToyVelocityNet net(arch);
  json j = velocity_checkpoint(net, 2, "h");
  int stage = 0;
  ToyVelocityNet back = velocity_from_checkpoint(json::parse(dump(j)), &stage);
  EXPECT_EQ(stage, 2);
  EXPECT_EQ(back.arch().atom_hidden, 5);
  ASSERT_EQ(back.params().size(), net.params().size());
  for (int p = 0; p < net.params().size(); ++p)
    EXPECT_EQ(back.params()[p].value, net.params()[p].value);
  j["params"][0]["rows"] = 999;
  EXPECT_THROW(velocity_from_checkpoint(j), DataError);
}

TEST(Checkpoint, ScorerRoundTrip) {
  Scorer s;
  s.feature_mean().setConstant(0.25);
  s.feature_scale().setConstant(2.0);
  Scorer back = scorer_from_checkpoint(json::parse(dump(scorer_checkpoint(s, "h"))));
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(5, kPoseFeatures);
  EXPECT_EQ(back.score(f), s.score(f));
  EXPECT_THROW(scorer_from_checkpoint(velocity_checkpoint(ToyVelocityNet(), 1, "h")),
               DataError);
}

}  // namespace
}  // namespace fmdock
