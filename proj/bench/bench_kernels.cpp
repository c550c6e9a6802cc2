//
// fmdock - flow-matching ligand docking toolkit
// SPDX-License-Identifier: Apache-2.0
//

// Serial reference vs OpenMP kernel for the three parallel hot spots.
// Speedups only show with more than one core; on one core the pairs should
// match to within scheduling overhead.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "fmdock/attention_bias.hpp"
#include "fmdock/filters.hpp"
#include "fmdock/sampler.hpp"
#include "fmdock/toysuite.hpp"
#include "fmdock/velocity_net.hpp"

namespace fmdock {
namespace {

struct BiasInputs {
  Coords x;
  Eigen::MatrixXi types;
  AttentionBiasFeaturizer f;
};

BiasInputs bias_inputs(int n_ligand, int n_residues) {
  Rng rng(7);
  BiasInputs in;
  const int n = n_ligand + n_residues + 1;
  in.x = Coords(3, n);
  for (int i = 0; i < n; ++i)
    in.x.col(i) = rng.normal3(8.0);
  in.types = token_edge_types(n_ligand, n_residues, 1);
  in.f = AttentionBiasFeaturizer::random(kNumEdgeTypes, 16, 32, 8, 3);
  return in;
}

void BM_AttentionBias(benchmark::State &st) {
  auto in = bias_inputs(32, static_cast<int>(st.range(0)));
  for (auto _: st)
    benchmark::DoNotOptimize(attention_bias(in.x, in.types, in.f));
}

void BM_AttentionBiasSerial(benchmark::State &st) {
  auto in = bias_inputs(32, static_cast<int>(st.range(0)));
  for (auto _: st)
    benchmark::DoNotOptimize(attention_bias_serial(in.x, in.types, in.f));
}

struct CheckInputs {
  SyntheticComplex c;
  std::vector<Coords> poses;
};

CheckInputs check_inputs(int n) {
  CheckInputs in { generate_complex(3, 0), {} };
  for (int i = 0; i < n; ++i)
    in.poses.push_back(make_decoy(in.c, 0.1 * i, 0.5, 100 + i));
  return in;
}

void BM_CheckBatch(benchmark::State &st) {
  auto in = check_inputs(static_cast<int>(st.range(0)));
  const auto &p = in.c.record.protein;
  PoseChecker pc(in.c.record.ligand.graph(), p.heavy_atoms(), p.heavy_elements());
  for (auto _: st)
    benchmark::DoNotOptimize(pc.check_batch(in.poses));
}

void BM_CheckBatchSerial(benchmark::State &st) {
  auto in = check_inputs(static_cast<int>(st.range(0)));
  const auto &p = in.c.record.protein;
  PoseChecker pc(in.c.record.ligand.graph(), p.heavy_atoms(), p.heavy_elements());
  for (auto _: st)
    benchmark::DoNotOptimize(pc.check_batch_serial(in.poses));
}

// Staged inference has no separate serial path: the reference is the same
// loop pinned to one thread.
void staged(benchmark::State &st, int threads) {
  const SyntheticComplex c = generate_complex(3, 0);
  const DockingContext ctx = DockingContext::from_protein(c.record.ligand, c.record.protein);
  const ToyVelocityNet n1(NetArch { 32, 32, 32, {}, 1 }), n2(NetArch { 32, 32, 32, {}, 2 }),
      n3(NetArch { 32, 32, 32, {}, 3 });
  const std::array<VelocityField, 3> fields = { make_field(n1, ctx), make_field(n2, ctx),
                                                make_field(n3, ctx) };
  RolloutConfig rc;
  rc.n_samples = static_cast<int>(st.range(0));
  const int keep = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : keep);
  for (auto _: st)
    benchmark::DoNotOptimize(
        staged_inference(c.record.ligand, c.record.protein.ca_centroid(), fields, rc));
  omp_set_num_threads(keep);
}

void BM_StagedInference(benchmark::State &st) { staged(st, 0); }
void BM_StagedInferenceSerial(benchmark::State &st) { staged(st, 1); }

BENCHMARK(BM_AttentionBias)->Arg(64)->Arg(256);
BENCHMARK(BM_AttentionBiasSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_CheckBatch)->Arg(40)->Arg(320);
BENCHMARK(BM_CheckBatchSerial)->Arg(40)->Arg(320);
BENCHMARK(BM_StagedInference)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StagedInferenceSerial)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fmdock

BENCHMARK_MAIN();
