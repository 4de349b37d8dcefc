#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "storyalign/curation.hpp"
#include "storyalign/illustrate.hpp"
#include "storyalign/retrieval_eval.hpp"

using namespace storyalign;

namespace {

RowMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scores Q article vectors against Q candidate sets of five images.
void BM_ScoreAll(benchmark::State& state) {
  const auto Q = static_cast<std::size_t>(state.range(0));
  const auto threads = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(3);
  std::vector<Eigen::VectorXd> queries;
  std::vector<RowMatrix> candidates;
  for (std::size_t i = 0; i < Q; ++i) {
    queries.push_back(gaussian(1, 64, rng).row(0).transpose());
    candidates.push_back(gaussian(5, 64, rng));
  }
  const auto scorer = make_set_scorer(SetScorer::Mean, {0.07, false});
  for (auto _ : state) benchmark::DoNotOptimize(score_all(queries, candidates, scorer, threads));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * Q * Q));
}
BENCHMARK(BM_ScoreAll)->Args({100, 1})->Args({500, 1})->Args({500, 4})->UseRealTime();

void BM_BestImageSet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  const RowMatrix pool = gaussian(static_cast<Eigen::Index>(n), 64, rng);
  const Eigen::VectorXd article = gaussian(1, 64, rng).row(0).transpose();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
  BestSetOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(best_image_set(article, ids, pool, opts));
}
BENCHMARK(BM_BestImageSet)->Arg(10)->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_ClusterVectors(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  const RowMatrix m = gaussian(static_cast<Eigen::Index>(n), 32, rng);
  std::vector<Eigen::VectorXd> vs;
  for (Eigen::Index i = 0; i < m.rows(); ++i) vs.push_back(m.row(i).transpose());
  for (auto _ : state) benchmark::DoNotOptimize(cluster_vectors(vs, 0.9, Linkage::Average));
}
BENCHMARK(BM_ClusterVectors)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
