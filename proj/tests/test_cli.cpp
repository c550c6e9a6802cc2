//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <cstdlib>

#include "cli_pipeline.hpp"
#include "fmdock/io.hpp"

namespace fmdock {
namespace {

using testing::cli;
using testing::fs::path;
using testing::slurp;

// One small pipeline shared by every test in the suite.
class CliPipeline : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = new path(testing::scratch_dir("cli-suite"));
    files_ = new std::map<std::string, std::string>(testing::run_small_pipeline(*dir_));
  }
  static void TearDownTestSuite() {
    testing::fs::remove_all(*dir_);
    delete dir_;
    delete files_;
  }
  static std::string at(const std::string &rel) { return (*dir_ / rel).string(); }
  static json read(const std::string &rel) { return json::parse(files_->at(rel)); }

  static path *dir_;
  static std::map<std::string, std::string> *files_;
};

path *CliPipeline::dir_ = nullptr;
std::map<std::string, std::string> *CliPipeline::files_ = nullptr;

// Numbers compared to a relative tolerance, everything else exactly.
void expect_json_near(const json &got, const json &want, const std::string &where) {
  if (want.is_number() && got.is_number()) {
    const double a = got.get<double>(), b = want.get<double>();
    EXPECT_LE(std::abs(a - b), 1e-6 * std::max(1.0, std::abs(b))) << where;
    return;
  }
  ASSERT_EQ(got.type(), want.type()) << where;
  if (want.is_object()) {
    ASSERT_EQ(got.size(), want.size()) << where;
    for (const auto &[k, v]: want.items()) {
      ASSERT_TRUE(got.contains(k)) << where << "." << k;
      expect_json_near(got[k], v, where + "." + k);
    }
  } else if (want.is_array()) {
    ASSERT_EQ(got.size(), want.size()) << where;
    for (std::size_t i = 0; i < want.size(); ++i)
      expect_json_near(got[i], want[i], where + "[" + std::to_string(i) + "]");
  } else {
    EXPECT_EQ(got, want) << where;
  }
}

TEST_F(CliPipeline, ProducesEveryArtifact) {
  for (const char *f: { "train/corpus.manifest", "s1.json", "s1.json.loss.csv", "s3.json",
                        "scorer.json", "report.json", "report.csv" })
    EXPECT_TRUE(files_->count(f)) << f;
  EXPECT_EQ(files_->at("s2.json.loss.csv").rfind("step,loss\n", 0), 0u);
  json report = read("report.json");
  EXPECT_EQ(report["kind"], "report");
  EXPECT_EQ(report["n"], 2);
  EXPECT_EQ(files_->at("report.csv").rfind(
                "complex_id,rmsd,pass_count,success_2a,success_2a_valid\n", 0),
            0u);
}

TEST_F(CliPipeline, RankedPoseIsAmongTheRetained) {
  for (const auto &[name, body]: *files_) {
    if (name.size() < 7 || name.substr(name.size() - 7) != ".r.json")
      continue;
    PoseSet ps = poseset_from_json(json::parse(body));
    ASSERT_TRUE(ps.selected && ps.retained);
    EXPECT_NE(std::find(ps.retained->begin(), ps.retained->end(), *ps.selected),
              ps.retained->end());
    for (int i: *ps.retained)
      EXPECT_LE(*ps.poses[i].score, *ps.poses[*ps.selected].score);
  }
}

TEST_F(CliPipeline, GoldenReport) {
  const std::string golden = std::string(FMDOCK_TEST_DATA) + "/golden_report.json";
  if (std::getenv("FMDOCK_UPDATE_GOLDEN")) {
    write_file_atomic(golden, files_->at("report.json"));
    GTEST_SKIP() << "golden report rewritten";
  }
  ASSERT_TRUE(testing::fs::exists(golden));
  expect_json_near(read("report.json"), json::parse(slurp(golden)), "report");
}

TEST_F(CliPipeline, SamplingReplaysByteForByte) {
  const std::string c = at("test/toy-01000.json");
  const std::string ck = at("s1.json") + "," + at("s2.json") + "," + at("s3.json");
  auto r = cli({ "sample", "--complex", c, "--checkpoints", ck, "--config", at("run.toml"),
                 "--seed", "17", "--out", at("replay.json") });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(at("replay.json")), files_->at("toy-01000.poses.json"));
  r = cli({ "sample", "--complex", c, "--checkpoints", ck, "--config", at("run.toml"),
            "--seed", "18", "--out", at("other.json") });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(at("other.json")), files_->at("toy-01000.poses.json"));
}

TEST_F(CliPipeline, PocketModeAcceptsAMissingStageOne) {
  const std::string ck = "-," + at("s2.json") + "," + at("s3.json");
  auto r = cli({ "sample", "--complex", at("test/toy-01000.json"), "--checkpoints", ck,
                 "--pocket-center", "1,2,3", "--n", "3", "--out", at("pocket.json") });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(poseset_from_json(json::parse(slurp(at("pocket.json")))).poses.size(), 3u);
  r = cli({ "sample", "--complex", at("test/toy-01000.json"), "--checkpoints", ck, "--n",
            "3", "--out", at("blind.json") });
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliPipeline, CheckpointStageMustMatchItsSlot) {
  const std::string ck = at("s2.json") + "," + at("s2.json") + "," + at("s3.json");
  auto r = cli({ "sample", "--complex", at("test/toy-01000.json"), "--checkpoints", ck,
                 "--out", at("bad.json") });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("\"data_error\""), std::string::npos);
}

TEST_F(CliPipeline, NonFiniteModelExitsThreeAndRmsdIsInfinite) {
  json s1 = read("s1.json");
  for (auto &p: s1["params"])
    for (auto &v: p["data"])
      v = "nan";
  write_file_atomic(at("nan.json"), dump(s1));
  const std::string ck = at("nan.json") + "," + at("s2.json") + "," + at("s3.json");
  auto r = cli({ "sample", "--complex", at("test/toy-01000.json"), "--checkpoints", ck,
                 "--n", "2", "--out", at("crash.json") });
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("\"numeric_error\""), std::string::npos);
  PoseSet crashed = poseset_from_json(json::parse(slurp(at("crash.json"))));
  EXPECT_TRUE(crashed.error.has_value());

  r = cli({ "rmsd", "--pred", at("crash.json"), "--ref", at("test/toy-01000.json"), "--out",
            at("crash.rmsd.json") });
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(json::parse(slurp(at("crash.rmsd.json")))["selected_rmsd"], "inf");

  r = cli({ "rmsd", "--pred", at("absent.json"), "--ref", at("test/toy-01000.json"),
            "--out", at("absent.rmsd.json") });
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(slurp(at("absent.rmsd.json")))["selected_rmsd"], "inf");
}

TEST_F(CliPipeline, AlignedRmsdOnTheSameProteinMatchesUnaligned) {
  const std::string c = at("test/toy-01001.json");
  auto r = cli({ "rmsd", "--pred", at("toy-01001.r.json"), "--ref", c, "--align", "base",
                 "--pred-complex", c, "--out", at("aligned.json") });
  ASSERT_EQ(r.code, 0) << r.err;
  json a = json::parse(slurp(at("aligned.json")));
  json u = read("runs/toy-01001.rmsd.json");
  EXPECT_NEAR(number_from_json(a["selected_rmsd"]), number_from_json(u["selected_rmsd"]),
              1e-6);
  EXPECT_NEAR(a["alignment"]["rmsd"].get<double>(), 0.0, 1e-9);
}

TEST(CliErrors, ExitCodes) {
  const path d = testing::scratch_dir("cli-errors");
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({ "frobnicate" }).code, 1);
  EXPECT_EQ(cli({ "train-toy", "--stage", "4", "--corpus", "x", "--out", "y" }).code, 1);
  auto r = cli({ "filter", "--poses", (d / "nope.json").string(), "--complex",
                 (d / "nope.json").string(), "--out", (d / "o.json").string() });
  EXPECT_EQ(r.code, 2);
  json e = json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], 2);
  EXPECT_EQ(e["error"]["subcommand"], "filter");
  write_file_atomic((d / "broken.json").string(), "{ not json");
  r = cli({ "rank", "--poses", (d / "broken.json").string(), "--out",
            (d / "o.json").string() });
  EXPECT_EQ(r.code, 2);
  write_file_atomic((d / "bad.toml").string(), "[train]\nsteps = -3\n");
  r = cli({ "train-toy", "--stage", "1", "--config", (d / "bad.toml").string(), "--corpus",
            d.string(), "--out", (d / "o.json").string() });
  EXPECT_EQ(r.code, 2);
  testing::fs::remove_all(d);
}

TEST(CliImport, PdbAndSdfBecomeAComplex) {
  const path d = testing::scratch_dir("cli-import");
  const std::string data = FMDOCK_TEST_DATA;
  auto r = cli({ "import", "--pdb", data + "/mini.pdb", "--sdf", data + "/mini.sdf",
                 "--native", data + "/mini.sdf", "--id", "mini", "--pocket-center",
                 "1,2,3", "--out", (d / "mini.json").string() });
  ASSERT_EQ(r.code, 0) << r.err;
  ComplexRecord c = complex_from_json(json::parse(slurp(d / "mini.json")));
  EXPECT_EQ(c.id, "mini");
  EXPECT_EQ(c.protein.num_residues(), 3);
  EXPECT_EQ(c.ligand.size(), 4);
  ASSERT_TRUE(c.native && c.pocket_center);
  EXPECT_EQ(*c.pocket_center, Vec3(1, 2, 3));
  r = cli({ "import", "--pdb", data + "/mini.pdb", "--sdf", data + "/bad_v3000.sdf",
            "--out", (d / "bad.json").string() });
  EXPECT_EQ(r.code, 2);
  testing::fs::remove_all(d);
}

}  // namespace
}  // namespace fmdock
