#include <benchmark/benchmark.h>

#include "icm/lfvi.hpp"
#include "icm/mlp.hpp"
#include "icm/model.hpp"
#include "icm/ols.hpp"
#include "icm/pca.hpp"
#include "icm/rng.hpp"
#include "icm/simgen.hpp"

namespace {

using namespace icm;

void BM_MlpForward(benchmark::State& state) {
  num::MlpSpec spec;
  spec.input_dim = 64;
  spec.hidden1 = 32;
  spec.hidden2 = 256;
  spec.batch_norm = true;
  spec.skip_prefix = 3;
  num::RngStream rng(1);
  num::MlpParams params = num::he_init(spec, rng);
  Matrix input(static_cast<Eigen::Index>(state.range(0)), spec.input_dim);
  for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  for (auto _ : state) {
    num::MlpCache cache;
    benchmark::DoNotOptimize(num::mlp_forward(spec, params, input, true, &cache));
  }
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(512);

void BM_MlpBackward(benchmark::State& state) {
  num::MlpSpec spec;
  spec.input_dim = 64;
  spec.hidden1 = 32;
  spec.hidden2 = 256;
  spec.batch_norm = true;
  spec.skip_prefix = 3;
  num::RngStream rng(1);
  num::MlpParams params = num::he_init(spec, rng);
  const Eigen::Index batch = state.range(0);
  Matrix input(batch, spec.input_dim);
  for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  num::MlpCache cache;
  num::mlp_forward(spec, params, input, true, &cache);
  const Matrix grad_out = Matrix::Ones(batch, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(num::mlp_backward(spec, params, cache, grad_out));
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(512);

void BM_SimulateGenotypes(benchmark::State& state) {
  num::RngStream rng(7);
  const auto structure = simgen::make_structure(
      simgen::StructureFamily::kPsd, 0.1, static_cast<int>(state.range(0)), 200, 3, rng);
  for (auto _ : state) {
    num::RngStream gen_rng(7);
    benchmark::DoNotOptimize(simgen::simulate_genotypes(structure, gen_rng, 1));
  }
}
BENCHMARK(BM_SimulateGenotypes)->Arg(1000)->Arg(5000);

void BM_Stage1Step(benchmark::State& state) {
  const int n = 300, m = 2000, batch = 512;
  const simgen::SimulatedDataset data = simgen::simulate_dataset(
      simgen::StructureFamily::kBnSurrogate, 0.1, m, n, 10, 11, 1);
  model::IcmConfig config;
  lfvi::Stage1Config s1;
  s1.seed = 3;
  lfvi::VariationalState st = lfvi::stage1_init(config, n, m, 3);
  std::vector<int> idx(batch);
  for (int i = 0; i < batch; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::uint64_t step = 0;
  for (auto _ : state) {
    num::RngStream step_rng = num::RngStream(99).split(step++);
    benchmark::DoNotOptimize(lfvi::stage1_step(data.genotypes, idx, st, s1, step_rng));
  }
}
BENCHMARK(BM_Stage1Step);

void BM_OlsScan(benchmark::State& state) {
  const int n = 500;
  num::RngStream rng(5);
  Matrix design(n, 5);
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 1; j < 5; ++j) design(i, j) = rng.normal();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(num::ols_ttest(y, design));
}
BENCHMARK(BM_OlsScan);

void BM_Pca(benchmark::State& state) {
  num::RngStream rng(9);
  Matrix data(500, static_cast<Eigen::Index>(state.range(0)));
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(num::top_principal_components(data, 3));
}
BENCHMARK(BM_Pca)->Arg(400)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
