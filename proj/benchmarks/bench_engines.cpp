#include <benchmark/benchmark.h>

#include "nervemp/bench.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/rng.hpp"
#include "nervemp/surrogate.hpp"

using namespace nervemp;

namespace {

QuadFunc random_form(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd f(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) f(r, c) = rng.normal();
  NodeSet vars(n);
  for (int k = 0; k < n; ++k) vars[k] = k;
  VectorXd b(n);
  for (int k = 0; k < n; ++k) b(k) = rng.normal();
  return QuadFunc(vars, f.transpose() * f, b, 0.0);
}

void BM_PartialMinimize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const QuadFunc q = random_form(n, 1);
  NodeSet elim;
  for (int k = 0; k < n / 2; ++k) elim.push_back(2 * k);
  for (auto _ : state) benchmark::DoNotOptimize(partial_minimize(q, elim));
}
BENCHMARK(BM_PartialMinimize)->Arg(8)->Arg(32)->Arg(128);

void BM_ExactMessagePassing(benchmark::State& state) {
  const auto rows = table1_rows();
  const SubgraphCover cover = cover_from_stats(rows, random_topology(rows, 1), 1);
  const Instance inst = gen_distributed_sampling(cover, {static_cast<int>(state.range(0)), 0.05, BasisSupport::local}, 2);
  const DirectedTree tree(spanning_tree(build_nerve(cover), cover), 0);
  for (auto _ : state) {
    const auto run = run_message_passing(inst.cover, inst.quads, inst.observations, tree);
    benchmark::DoNotOptimize(local_solve(run).value);
  }
}
BENCHMARK(BM_ExactMessagePassing)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_CentralizedSolve(benchmark::State& state) {
  const auto rows = table1_rows();
  const SubgraphCover cover = cover_from_stats(rows, random_topology(rows, 1), 1);
  const Instance inst = gen_distributed_sampling(cover, {50, 0.05, BasisSupport::local}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(centralized_solve(inst.cover, inst.quads, inst.observations).value);
}
BENCHMARK(BM_CentralizedSolve)->Unit(benchmark::kMillisecond);

void BM_NetworkFit(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  NodeSet vars(d);
  for (int k = 0; k < d; ++k) vars[k] = k;
  const SampleSet s = sample_message([](const VectorXd& x) { return x.squaredNorm(); }, vars,
                                     Box::around(VectorXd::Zero(d), 2.0), 80, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_surrogate(s, SurrogateKind::one_hidden_layer, {}, 4).training().final_loss);
}
BENCHMARK(BM_NetworkFit)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_QuadraticFit(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  NodeSet vars(d);
  for (int k = 0; k < d; ++k) vars[k] = k;
  const SampleSet s = sample_message([](const VectorXd& x) { return x.squaredNorm(); }, vars,
                                     Box::around(VectorXd::Zero(d), 2.0), 2 * quadratic_coefficient_count(d), 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_surrogate(s, SurrogateKind::quadratic_ls, {}, 4).training().rmse);
}
BENCHMARK(BM_QuadraticFit)->Arg(4)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
