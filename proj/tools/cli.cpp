//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fmdock/io.hpp"
#include "fmdock/pipeline.hpp"
#include "fmdock/rng.hpp"
#include "fmdock/toysuite.hpp"

namespace fs = std::filesystem;

namespace fmdock {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct UsageError: std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json(const std::string &path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error &e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

ComplexRecord load_complex(const std::string &path) {
  return complex_from_json(load_json(path));
}

PoseSet load_poses(const std::string &path) {
  return poseset_from_json(load_json(path));
}

RunConfig load_config(const std::string &path) {
  return path.empty() ? RunConfig {} : parse_run_config(read_text_file(path));
}

/// Complex records of a directory, sorted by file name.
std::vector<ComplexRecord> load_corpus(const std::string &dir) {
  if (!fs::is_directory(dir))
    throw DataError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto &e: fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ComplexRecord> out;
  for (const auto &f: files) {
    json j = load_json(f.string());
    if (j.is_object() && j.value("kind", "") == "complex")
      out.push_back(complex_from_json(j));
  }
  if (out.empty())
    throw DataError("no complex records in '" + dir + "'");
  return out;
}

Vec3 parse_point(const std::string &s) {
  std::stringstream ss(s);
  std::string tok;
  std::vector<double> v;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size())
        throw std::invalid_argument(tok);
    } catch (const std::exception &) {
      throw UsageError("malformed coordinate '" + tok + "' in '" + s + "'");
    }
  }
  if (v.size() != 3)
    throw UsageError("expected x,y,z, got '" + s + "'");
  return Vec3(v[0], v[1], v[2]);
}

std::vector<std::string> split_commas(const std::string &s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(tok);
  return out;
}

// ---- subcommands -----------------------------------------------------------

struct GenerateArgs {
  std::uint64_t seed = 0;
  int first = 0;
  int n = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs &a, std::ostream &out,
                 std::ostream &err) {
  if (a.n < 1)
    throw UsageError("--n must be at least 1");
  fs::create_directories(a.out);
  std::vector<std::string> warnings;
  auto corpus = generate_corpus(a.seed, a.first, a.n, {}, &warnings);
  json ids = json::array();
  for (const auto &c: corpus) {
    write_file_atomic((fs::path(a.out) / (c.record.id + ".json")).string(),
                      dump(complex_to_json(c.record)));
    ids.push_back(c.record.id);
  }
  for (const auto &w: warnings)
    err << "warning: " << w << "\n";
  write_file_atomic((fs::path(a.out) / "corpus.manifest").string(),
                    dump({ { "seed", a.seed },
                           { "first", a.first },
                           { "n", a.n },
                           { "ids", ids },
                           { "warnings", warnings } }));
  out << "generated " << corpus.size() << " complexes in " << a.out << "\n";
  return 0;
}

struct ImportArgs {
  std::string pdb, sdf, native, id = "complex", pocket, out;
};

int cmd_import(const ImportArgs &a, std::ostream &out, std::ostream &err) {
  std::vector<std::string> warnings;
  ComplexRecord c;
  c.id = a.id;
  c.protein = parse_pdb_min(read_text_file(a.pdb), &warnings);
  c.ligand = parse_sdf_min(read_text_file(a.sdf)).centered();
  if (!a.native.empty()) {
    LigandConformer nat = parse_sdf_min(read_text_file(a.native));
    if (nat.elements() != c.ligand.elements())
      throw DataError("native ligand atoms do not match the input conformer");
    c.native = nat.coords();
  }
  if (!a.pocket.empty())
    c.pocket_center = parse_point(a.pocket);
  c.metadata["source"] = "import";
  for (const auto &w: warnings)
    err << "warning: " << w << "\n";
  for (const auto &w: c.ligand.warnings())
    err << "warning: " << w << "\n";
  write_file_atomic(a.out, dump(complex_to_json(c)));
  out << "imported " << c.protein.num_residues() << " residues, "
      << c.ligand.size() << " ligand atoms\n";
  return 0;
}

struct TrainToyArgs {
  int stage = 0;
  std::string config, corpus, out, loss_csv;
};

int cmd_train_toy(const TrainToyArgs &a, std::ostream &out) {
  RunConfig cfg = load_config(a.config);
  auto corpus = load_corpus(a.corpus);
  std::vector<double> losses;
  ToyVelocityNet net = train_stage_model(corpus, cfg, a.stage, &losses);
  write_file_atomic(a.out, dump(velocity_checkpoint(net, a.stage,
                                                    config_hash(cfg))));
  std::string csv = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, losses[i]);
    csv += buf;
  }
  write_file_atomic(a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv,
                    csv);
  out << "stage " << a.stage << ": " << losses.size() << " steps, final loss "
      << (losses.empty() ? 0.0 : losses.back()) << "\n";
  return 0;
}

struct TrainScorerArgs {
  std::string config, corpus, out;
};

int cmd_train_scorer(const TrainScorerArgs &a, std::ostream &out,
                     std::ostream &err) {
  RunConfig cfg = load_config(a.config);
  auto corpus = load_corpus(a.corpus);
  ScorerFit fit = train_scorer_model(corpus, cfg);
  for (const auto &w: fit.report.warnings)
    err << "warning: " << w << "\n";
  json ck = scorer_checkpoint(fit.scorer, config_hash(cfg));
  ck["metrics"] = {
    { "train_pairwise_accuracy", fit.train_accuracy },
    { "skipped_batches", fit.report.skipped_batches },
    { "final_epoch_loss",
      fit.report.epoch_loss.empty() ? 0.0 : fit.report.epoch_loss.back() },
  };
  write_file_atomic(a.out, dump(ck));
  out << "scorer: pairwise accuracy " << fit.train_accuracy << "\n";
  return 0;
}

struct SampleArgs {
  std::string complex, checkpoints, config, pocket_center, out;
  bool pocket = false;
  int n = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_sample(const SampleArgs &a, std::ostream &out) {
  RunConfig cfg = load_config(a.config);
  if (a.n > 0)
    cfg.n_samples = a.n;
  if (a.steps > 0)
    cfg.n_steps = a.steps;
  if (a.seed_set)
    cfg.sample_seed = a.seed;
  ComplexRecord c = load_complex(a.complex);
  const bool pocket = a.pocket || !a.pocket_center.empty();
  if (!a.pocket_center.empty())
    c.pocket_center = parse_point(a.pocket_center);

  auto paths = split_commas(a.checkpoints);
  if (paths.size() != 3)
    throw UsageError("--checkpoints needs three comma-separated files "
                     "(the first may be '-' in pocket-aware mode)");
  std::vector<ToyVelocityNet> nets(3);
  StageNets sn {};
  for (int s = 0; s < 3; ++s) {
    if (paths[s] == "-") {
      if (s != 0 || !pocket)
        throw UsageError("only the stage-1 checkpoint may be omitted, and "
                         "only in pocket-aware mode");
      continue;
    }
    int stage = 0;
    nets[s] = velocity_from_checkpoint(load_json(paths[s]), &stage);
    if (stage != s + 1)
      throw DataError("'" + paths[s] + "' is a stage-" + std::to_string(stage)
                      + " checkpoint, expected stage " + std::to_string(s + 1));
    sn[s] = &nets[s];
  }

  try {
    PoseSet ps = sample_complex(c, sn, cfg, cfg.sample_seed, pocket);
    write_file_atomic(a.out, dump(poseset_to_json(ps)));
    out << "sampled " << ps.poses.size() << " poses for " << c.id << "\n";
    return 0;
  } catch (const NumericError &e) {
    // Keep an artifact so that downstream steps score this complex as +inf.
    PoseSet crashed;
    crashed.complex_id = c.id;
    crashed.config_hash = config_hash(cfg);
    crashed.seed = cfg.sample_seed;
    crashed.error = e.what();
    write_file_atomic(a.out, dump(poseset_to_json(crashed)));
    throw;
  }
}

FilterThresholds load_thresholds(const std::string &path) {
  return load_config(path).filters;
}

struct FilterArgs {
  std::string poses, complex, thresholds, out;
};

int cmd_filter(const FilterArgs &a, std::ostream &out) {
  PoseSet ps = load_poses(a.poses);
  ComplexRecord c = load_complex(a.complex);
  filter_poses(ps, c, load_thresholds(a.thresholds));
  write_file_atomic(a.out, dump(poseset_to_json(ps)));
  out << "retained " << ps.retained->size() << " of " << ps.poses.size()
      << " poses\n";
  return 0;
}

struct ScoreArgs {
  std::string poses, complex, scorer, thresholds, out;
};

int cmd_score(const ScoreArgs &a, std::ostream &out) {
  PoseSet ps = load_poses(a.poses);
  ComplexRecord c = load_complex(a.complex);
  Scorer s = scorer_from_checkpoint(load_json(a.scorer));
  score_poses(ps, c, s, load_thresholds(a.thresholds));
  write_file_atomic(a.out, dump(poseset_to_json(ps)));
  out << "scored " << ps.poses.size() << " poses\n";
  return 0;
}

struct RankArgs {
  std::string poses, complex, sdf, out;
};

int cmd_rank(const RankArgs &a, std::ostream &out) {
  PoseSet ps = load_poses(a.poses);
  int best = rank_poses(ps);
  write_file_atomic(a.out, dump(poseset_to_json(ps)));
  if (!a.sdf.empty()) {
    if (a.complex.empty())
      throw UsageError("--sdf needs --complex for the ligand topology");
    ComplexRecord c = load_complex(a.complex);
    write_file_atomic(a.sdf, write_sdf(c.ligand, ps.poses[best].coords,
                                       ps.complex_id));
  }
  out << "selected pose " << best << "\n";
  return 0;
}

struct RmsdArgs {
  std::string pred, ref, pred_complex, align = "none", out;
};

int cmd_rmsd(const RmsdArgs &a, std::ostream &out, std::ostream &err) {
  ComplexRecord ref = load_complex(a.ref);
  if (!ref.native)
    throw DataError("reference complex '" + ref.id + "' has no native pose");
  json row = { { "schema_version", kSchemaVersion },
               { "kind", "rmsd" },
               { "complex_id", ref.id },
               { "align", a.align } };
  json rows = json::array();
  double selected_rmsd = kInf;
  int selected_pass = 0;
  std::string failure;

  std::optional<PoseSet> ps;
  if (!fs::exists(a.pred)) {
    failure = "prediction '" + a.pred + "' is missing";
  } else {
    ps = load_poses(a.pred);
    if (ps->error)
      failure = "sampling failed: " + *ps->error;
    else if (ps->poses.empty())
      failure = "prediction has no poses";
  }

  if (failure.empty()) {
    if (ps->complex_id != ref.id)
      throw DataError("prediction is for '" + ps->complex_id
                      + "', reference is '" + ref.id + "'");
    const int sel = ps->selected.value_or(0);
    if (sel < 0 || sel >= static_cast<int>(ps->poses.size()))
      throw DataError("selected index out of range");
    row["selection"] = ps->selected ? "ranked" : "first";
    row["selected"] = sel;

    ComplexRecord target = ref;
    try {
      if (a.align != "none") {
        ProteinStructure pred_protein =
            a.pred_complex.empty() ? ref.protein
                                   : load_complex(a.pred_complex).protein;
        AlignResult al =
            a.align == "base"
                ? pocket_align_base(ref.protein, *ref.native, pred_protein)
                : pocket_align_pocketbased(ref.protein, *ref.native,
                                           pred_protein,
                                           ps->poses[sel].coords);
        target.native = al.transform.apply(*ref.native);
        row["alignment"] = { { "rmsd", al.rmsd },
                             { "pairs", al.pairs },
                             { "chain", al.chain } };
      }
      auto r = pose_rmsds(*ps, target);
      for (std::size_t i = 0; i < r.size(); ++i) {
        json e = { { "pose", i }, { "rmsd", number_to_json(r[i]) } };
        if (ps->poses[i].report)
          e["pass_count"] = ps->poses[i].report->pass_count;
        rows.push_back(e);
      }
      selected_rmsd = r[sel];
      selected_pass = ps->poses[sel].report ? ps->poses[sel].report->pass_count
                                            : -1;
    } catch (const DataError &e) {
      failure = std::string("alignment failed: ") + e.what();
    }
  }
  if (!failure.empty()) {
    row["error"] = failure;
    err << "warning: " << ref.id << ": " << failure << "; RMSD = inf\n";
  }
  row["rows"] = rows;
  row["selected_rmsd"] = number_to_json(selected_rmsd);
  row["selected_pass_count"] = selected_pass;
  write_file_atomic(a.out, dump(row));
  out << ref.id << " rmsd " << selected_rmsd << "\n";
  return 0;
}

struct ReportArgs {
  std::string runs, out;
};

int cmd_report(const ReportArgs &a, std::ostream &out) {
  if (!fs::is_directory(a.runs))
    throw DataError("'" + a.runs + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto &e: fs::directory_iterator(a.runs)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 10
        && name.compare(name.size() - 10, 10, ".rmsd.json") == 0)
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw DataError("no *.rmsd.json files in '" + a.runs + "'");

  std::vector<double> rmsd;
  std::vector<ValidityReport> reports;
  bool validity_known = true;
  json complexes = json::array();
  std::string csv = "complex_id,rmsd,pass_count,success_2a,success_2a_valid\n";
  char buf[256];
  for (const auto &f: files) {
    json j = load_json(f.string());
    if (j.value("kind", "") != "rmsd")
      throw DataError("'" + f.string() + "' is not an rmsd record");
    const std::string id = j.at("complex_id").get<std::string>();
    const double r = number_from_json(j.at("selected_rmsd"));
    const int pc = j.at("selected_pass_count").get<int>();
    validity_known = validity_known && (pc >= 0 || !std::isfinite(r));
    ValidityReport rep;
    rep.pass_count = std::max(pc, 0);
    rmsd.push_back(r);
    reports.push_back(rep);
    const bool ok = r <= 2.0, ok_valid = ok && pc == 4;
    std::snprintf(buf, sizeof buf, "%s,%.6f,%d,%d,%d\n", id.c_str(), r, pc,
                  ok ? 1 : 0, ok_valid ? 1 : 0);
    csv += buf;
    complexes.push_back({ { "complex_id", id },
                          { "rmsd", number_to_json(r) },
                          { "pass_count", pc } });
  }
  SuccessRates s = success_rates(rmsd, reports);
  json summary = { { "schema_version", kSchemaVersion },
                   { "kind", "report" },
                   { "n", s.n },
                   { "success_rmsd_2a", s.rmsd_2a },
                   { "success_rmsd_2a_valid",
                     validity_known ? json(s.rmsd_2a_valid) : json() },
                   { "complexes", complexes } };
  write_file_atomic(a.out + ".json", dump(summary));
  write_file_atomic(a.out + ".csv", csv);
  out << "n=" << s.n << " success@2A=" << s.rmsd_2a
      << " success@2A&valid=" << s.rmsd_2a_valid << "\n";
  return 0;
}

void error_record(std::ostream &err, int code, const char *type,
                  const std::string &msg, const std::string &sub) {
  err << json({ { "error",
                  { { "code", code },
                    { "type", type },
                    { "subcommand", sub },
                    { "message", msg } } } })
             .dump()
      << "\n";
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err) {
  CLI::App app { "fmdock: flow-matching ligand docking toolkit" };
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP threads (default: FMDOCK_THREADS, else all cores)");

  GenerateArgs gen;
  auto *sc_gen = app.add_subcommand("generate", "synthetic toy complexes");
  sc_gen->add_option("--seed", gen.seed);
  sc_gen->add_option("--first", gen.first, "index of the first complex");
  sc_gen->add_option("--n", gen.n)->required();
  sc_gen->add_option("--out", gen.out, "output directory")->required();

  ImportArgs imp;
  auto *sc_imp = app.add_subcommand("import", "PDB + SDF to a complex record");
  sc_imp->add_option("--pdb", imp.pdb)->required();
  sc_imp->add_option("--sdf", imp.sdf, "input conformer")->required();
  sc_imp->add_option("--native", imp.native, "native pose (same atom order)");
  sc_imp->add_option("--id", imp.id);
  sc_imp->add_option("--pocket-center", imp.pocket, "x,y,z");
  sc_imp->add_option("--out", imp.out)->required();

  TrainToyArgs tt;
  auto *sc_tt = app.add_subcommand("train-toy", "train one stage model");
  sc_tt->add_option("--stage", tt.stage)->required()->check(CLI::Range(1, 3));
  sc_tt->add_option("--config", tt.config);
  sc_tt->add_option("--corpus", tt.corpus, "directory of complexes")
      ->required();
  sc_tt->add_option("--out", tt.out, "checkpoint")->required();
  sc_tt->add_option("--loss-csv", tt.loss_csv);

  TrainScorerArgs ts;
  auto *sc_ts = app.add_subcommand("train-scorer", "train the pose scorer");
  sc_ts->add_option("--config", ts.config);
  sc_ts->add_option("--corpus", ts.corpus)->required();
  sc_ts->add_option("--out", ts.out)->required();

  SampleArgs sa;
  auto *sc_sa = app.add_subcommand("sample", "staged inference");
  sc_sa->add_option("--complex", sa.complex)->required();
  sc_sa->add_option("--checkpoints", sa.checkpoints, "s1,s2,s3")->required();
  sc_sa->add_option("--n", sa.n, "number of samples");
  sc_sa->add_option("--steps", sa.steps, "Euler steps per stage");
  sc_sa->add_option("--seed", sa.seed);
  sc_sa->add_option("--config", sa.config);
  sc_sa->add_option("--pocket-center", sa.pocket_center, "x,y,z");
  sc_sa->add_flag("--pocket", sa.pocket, "use the complex's pocket center");
  sc_sa->add_option("--out", sa.out)->required();

  FilterArgs fa;
  auto *sc_fa = app.add_subcommand("filter", "physical validity filters");
  sc_fa->add_option("--poses", fa.poses)->required();
  sc_fa->add_option("--complex", fa.complex)->required();
  sc_fa->add_option("--thresholds", fa.thresholds, "config with [filters]");
  sc_fa->add_option("--out", fa.out)->required();

  ScoreArgs so;
  auto *sc_so = app.add_subcommand("score", "score every pose");
  sc_so->add_option("--poses", so.poses)->required();
  sc_so->add_option("--complex", so.complex)->required();
  sc_so->add_option("--scorer", so.scorer)->required();
  sc_so->add_option("--thresholds", so.thresholds);
  sc_so->add_option("--out", so.out)->required();

  RankArgs ra;
  auto *sc_ra = app.add_subcommand("rank", "select one pose");
  sc_ra->add_option("--poses", ra.poses)->required();
  sc_ra->add_option("--complex", ra.complex);
  sc_ra->add_option("--sdf", ra.sdf, "also write the selected pose");
  sc_ra->add_option("--out", ra.out)->required();

  RmsdArgs rm;
  auto *sc_rm = app.add_subcommand("rmsd", "symmetry RMSD to the native");
  sc_rm->add_option("--pred", rm.pred)->required();
  sc_rm->add_option("--ref", rm.ref)->required();
  sc_rm->add_option("--pred-complex", rm.pred_complex,
                    "complex holding the predicted protein");
  sc_rm->add_option("--align", rm.align)
      ->check(CLI::IsMember({ "none", "base", "pocket" }));
  sc_rm->add_option("--out", rm.out)->required();

  ReportArgs rp;
  auto *sc_rp = app.add_subcommand("report", "success-rate table");
  sc_rp->add_option("--runs", rp.runs, "directory of *.rmsd.json")
      ->required();
  sc_rp->add_option("--out", rp.out, "output prefix (.csv, .json)")
      ->required();

  std::string sub = "fmdock";
  try {
    app.parse(argc, argv);
    sa.seed_set = sc_sa->count("--seed") > 0;
    sub = app.get_subcommands().front()->get_name();

    if (threads == 0)
      if (const char *env = std::getenv("FMDOCK_THREADS")) {
        char *end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*env == '\0' || *end != '\0' || v < 1)
          throw UsageError(std::string("FMDOCK_THREADS must be a positive "
                                       "integer, got '") + env + "'");
        threads = static_cast<int>(v);
      }
    if (threads < 0)
      throw UsageError("--threads must be positive");
    if (threads > 0)
      omp_set_num_threads(threads);

    if (*sc_gen)
      return cmd_generate(gen, out, err);
    if (*sc_imp)
      return cmd_import(imp, out, err);
    if (*sc_tt)
      return cmd_train_toy(tt, out);
    if (*sc_ts)
      return cmd_train_scorer(ts, out, err);
    if (*sc_sa)
      return cmd_sample(sa, out);
    if (*sc_fa)
      return cmd_filter(fa, out);
    if (*sc_so)
      return cmd_score(so, out);
    if (*sc_ra)
      return cmd_rank(ra, out);
    if (*sc_rm)
      return cmd_rmsd(rm, out, err);
    if (*sc_rp)
      return cmd_report(rp, out);
    return 1;
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError &e) {
    error_record(err, 1, "usage_error", e.what(), sub);
    return 1;
  } catch (const UsageError &e) {
    error_record(err, 1, "usage_error", e.what(), sub);
    return 1;
  } catch (const DataError &e) {
    error_record(err, 2, "data_error", e.what(), sub);
    return 2;
  } catch (const json::exception &e) {
    error_record(err, 2, "data_error", e.what(), sub);
    return 2;
  } catch (const fs::filesystem_error &e) {
    error_record(err, 2, "data_error", e.what(), sub);
    return 2;
  } catch (const NumericError &e) {
    error_record(err, 3, "numeric_error", e.what(), sub);
    return 3;
  } catch (const std::exception &e) {
    error_record(err, 2, "internal_error", e.what(), sub);
    return 2;
  }
}

}  // namespace fmdock
