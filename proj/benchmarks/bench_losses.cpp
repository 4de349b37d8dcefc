#include <random>

#include <benchmark/benchmark.h>

#include "storyalign/gradcheck.hpp"
#include "storyalign/objectives.hpp"
#include "storyalign/synthetic.hpp"
#include "storyalign/trainer.hpp"

using namespace storyalign;

namespace {

diff::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  diff::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Forward and backward of MIL-SIM on a batch of B stories with 8 sentences
// and 5 images each in a 32-dimensional joint space.
void BM_MilSimForwardBackward(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const diff::Matrix sentences = gaussian(static_cast<Eigen::Index>(B * 8), 32, rng);
  const diff::Matrix images = gaussian(static_cast<Eigen::Index>(B * 5), 32, rng);
  std::vector<std::size_t> so, io;
  for (std::size_t b = 0; b <= B; ++b) {
    so.push_back(8 * b);
    io.push_back(5 * b);
  }
  for (auto _ : state) {
    diff::Tape t;
    BatchTensors batch{t.parameter(sentences), t.parameter(images), so, io};
    diff::Var loss = milsim_loss(batch, 0.1, MilSimConfig{});
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(batch.images));
  }
}
BENCHMARK(BM_MilSimForwardBackward)->Arg(8)->Arg(16)->Arg(32);

void BM_MilNceForwardBackward(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const diff::Matrix text = gaussian(static_cast<Eigen::Index>(B), 32, rng);
  const diff::Matrix images = gaussian(static_cast<Eigen::Index>(B * 5), 32, rng);
  std::vector<std::size_t> io;
  for (std::size_t b = 0; b <= B; ++b) io.push_back(5 * b);
  for (auto _ : state) {
    diff::Tape t;
    diff::Var x = t.parameter(text);
    diff::Var loss = milnce_loss(x, t.parameter(images), io, {0.07, true});
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(x));
  }
}
BENCHMARK(BM_MilNceForwardBackward)->Arg(8)->Arg(16)->Arg(32);

void BM_TrainStep(benchmark::State& state) {
  const Objective objective = static_cast<Objective>(state.range(0));
  SyntheticGenConfig g;
  const Dataset data = generate_synthetic_corpus(g);
  TrainConfig cfg;
  cfg.objective = objective;
  TrainState ts = init_train_state(data, cfg);
  const auto pool = stories_in_split(data.manifest, kTrainSplit);
  const BatchInputs batch = build_batch(data, pool, cfg, ts.rng);
  for (auto _ : state) {
    if (ts.optimizer.step >= cfg.total_steps) ts.optimizer.step = 0;
    benchmark::DoNotOptimize(train_step(ts.model, ts.optimizer, batch, cfg, ts.rng));
  }
  state.SetLabel(std::string(to_string(objective)));
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 3);

void BM_GradCheck(benchmark::State& state) {
  GradCheckOptions opts;
  opts.batches = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_gradcheck(opts));
}
BENCHMARK(BM_GradCheck)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
