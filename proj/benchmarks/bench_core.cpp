#include <benchmark/benchmark.h>

#include "nstlab/harness.hpp"
#include "nstlab/losses.hpp"
#include "nstlab/trainer.hpp"

using namespace nst;

namespace {

MlpParams bench_model(std::size_t width) {
  Rng rng(1);
  return init_params({{2, width, width, 10}, 1}, rng);
}

PartialDataset bench_data() {
  DataSpec spec;
  spec.kind = DataKind::Blobs;
  spec.n = 1000;
  spec.k = 10;
  spec.spread = 1.0;
  spec.seed = 1;
  Dataset ds = make_dataset(spec);
  PartialDataset part = split_semi(ds, 20, 0, 100, 1);
  return build_equivalence_classes(std::move(part), EquivMode::PerLabel, 0, 1);
}

}  // namespace

static void BM_MatmulForward(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> av(n * n), bv(n * n);
  for (double& v : av) v = rng.uniform(-1, 1);
  for (double& v : bv) v = rng.uniform(-1, 1);
  Tensor a = Tensor::from({n, n}, av);
  Tensor b = Tensor::from({n, n}, bv);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MatmulForward)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void BM_ForwardBackward(benchmark::State& state) {
  std::size_t width = static_cast<std::size_t>(state.range(0));
  MlpParams model = bench_model(width);
  Rng rng(3);
  std::vector<double> xv(64 * 2);
  for (double& v : xv) v = rng.uniform(-2, 2);
  Tensor x = Tensor::from({64, 2}, xv);
  std::vector<int> y(64);
  for (int& v : y) v = static_cast<int>(rng.uniform_index(10));
  std::vector<Tensor> leaves = model.all();
  for (auto _ : state) {
    Tensor loss = cross_entropy(predict_proba(model, x), y);
    benchmark::DoNotOptimize(backward(loss, leaves));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(32)->Arg(64);

static void BM_TrainStep(benchmark::State& state) {
  Method method = static_cast<Method>(state.range(0));
  PartialDataset data = bench_data();
  TrainConfig config;
  config.method = method;
  config.hidden_widths = {32, 32};
  config.steps = 1;
  config.batch_labeled = 20;
  config.batch_unlabeled = 32;
  config.seed = 4;
  config.augment = {AugmentPolicy::Kind::GaussianJitter, 0.15, 0};
  TrainerSession session(config, data);
  for (auto _ : state) {
    session.step();
  }
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Method::Supervised))
    ->Arg(static_cast<int>(Method::Nst))
    ->Arg(static_cast<int>(Method::Vat))
    ->Arg(static_cast<int>(Method::MixMatch))
    ->Arg(static_cast<int>(Method::MixMatchNst));

static void BM_SweepCell(benchmark::State& state) {
  PartialDataset data = bench_data();
  TrainConfig config;
  config.method = Method::Nst;
  config.hidden_widths = {32};
  config.steps = 50;
  config.batch_labeled = 20;
  config.batch_unlabeled = 32;
  config.eval_interval = 50;
  config.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(config, data));
  }
}
BENCHMARK(BM_SweepCell);

BENCHMARK_MAIN();
