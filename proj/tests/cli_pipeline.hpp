//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Drives the command-line tool in-process through a small end-to-end run.
// Shared by the CLI tests and the acceptance checks.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fmdock::testing {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fmdock");
  std::vector<const char *> argv;
  for (const auto &a: args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string &name) {
  fs::path d = fs::temp_directory_path() / ("fmdock-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct PipelineSpec {
  std::uint64_t seed = 17;
  int n_train = 6;
  int n_test = 2;
  int train_steps = 60;
  int n_samples = 6;
};

/// generate -> train-toy x3 -> train-scorer -> sample -> filter -> score ->
/// rank -> rmsd -> report, all under `dir`. Throws with the failing
/// command's stderr on a non-zero exit. Returns every artifact by relative
/// path.
inline std::map<std::string, std::string> run_small_pipeline(const fs::path &dir,
                                                             const PipelineSpec &s = {}) {
  auto run = [](std::vector<std::string> args) {
    CliResult r = cli(args);
    if (r.code != 0)
      throw std::runtime_error(args[0] + " exited " + std::to_string(r.code) + ": "
                               + r.err);
  };
  const std::string d = dir.string();
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "[train]\nsteps = " << s.train_steps << "\nbatch_size = 8\n"
        << "[scorer]\nepochs = 8\nposes_per_complex = 12\n"
        << "[rollout]\nn_samples = " << s.n_samples << "\n";
  }
  const std::string seed = std::to_string(s.seed);
  run({ "generate", "--seed", seed, "--n", std::to_string(s.n_train), "--out", d + "/train" });
  run({ "generate", "--seed", seed, "--first", "1000", "--n", std::to_string(s.n_test),
        "--out", d + "/test" });
  for (int st = 1; st <= 3; ++st)
    run({ "train-toy", "--stage", std::to_string(st), "--config", d + "/run.toml",
          "--corpus", d + "/train", "--out", d + "/s" + std::to_string(st) + ".json" });
  run({ "train-scorer", "--config", d + "/run.toml", "--corpus", d + "/train", "--out",
        d + "/scorer.json" });
  fs::create_directories(dir / "runs");
  std::vector<fs::path> complexes;
  for (const auto &e: fs::directory_iterator(dir / "test"))
    if (e.path().extension() == ".json")
      complexes.push_back(e.path());
  std::sort(complexes.begin(), complexes.end());
  for (const auto &c: complexes) {
    const std::string id = c.stem().string(), base = d + "/" + id;
    run({ "sample", "--complex", c.string(), "--checkpoints",
          d + "/s1.json," + d + "/s2.json," + d + "/s3.json", "--config", d + "/run.toml",
          "--seed", seed, "--out", base + ".poses.json" });
    run({ "filter", "--poses", base + ".poses.json", "--complex", c.string(), "--out",
          base + ".f.json" });
    run({ "score", "--poses", base + ".f.json", "--complex", c.string(), "--scorer",
          d + "/scorer.json", "--out", base + ".s.json" });
    run({ "rank", "--poses", base + ".s.json", "--complex", c.string(), "--sdf",
          base + ".sdf", "--out", base + ".r.json" });
    run({ "rmsd", "--pred", base + ".r.json", "--ref", c.string(), "--out",
          d + "/runs/" + id + ".rmsd.json" });
  }
  run({ "report", "--runs", d + "/runs", "--out", d + "/report" });

  std::map<std::string, std::string> files;
  for (const auto &e: fs::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

}  // namespace fmdock::testing
