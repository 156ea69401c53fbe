// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "dfl/decisions.hpp"
#include "dfl/gradcheck.hpp"
#include "dfl/graph.hpp"
#include "dfl/kernels.hpp"

namespace {

using namespace dfl;

template <Tensor (*Fn)(const Tensor&, const Tensor&)>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor(n, n, 1), b = random_tensor(n, 50, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetComplexityN(state.range(0));
}

template <Tensor (*Fn)(const Tensor&, const Tensor&, double)>
void bm_cosine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor(n, 50, 1), mu = random_tensor(5, 50, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, mu, 1e-12));
}

template <Tensor (*Fn)(const Tensor&, double)>
void bm_softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor(n, 5, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, 50.0));
}

kernels::SortedDistances sbm_table(int n) {
  const Graph g = largest_connected_component(generate_sbm({n / 2, n - n / 2}, 0.05, 0.01, 3)).graph;
  const DistanceTable d = all_pairs_bfs(g);
  return sort_distances(d, default_empty_distance(d));
}

template <std::vector<double> (*Fn)(std::span<const double>, const kernels::SortedDistances&)>
void bm_expected_distance(benchmark::State& state) {
  const auto table = sbm_table(static_cast<int>(state.range(0)));
  const Tensor x = random_tensor(1, table.n, 4, 0.0, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x.values(), table));
}

template <std::vector<double> (*Fn)(std::span<const double>, const kernels::SortedDistances&,
                                    std::span<const double>)>
void bm_expected_distance_grad(benchmark::State& state) {
  const auto table = sbm_table(static_cast<int>(state.range(0)));
  const Tensor x = random_tensor(1, table.n, 4, 0.0, 0.01);
  const Tensor up = random_tensor(1, table.n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x.values(), table, up.values()));
}

}  // namespace

BENCHMARK(bm_gemm<kernels::serial::gemm>)->Name("gemm/serial")->Arg(250)->Arg(500)->Arg(1000);
BENCHMARK(bm_gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->Arg(250)->Arg(500)->Arg(1000);
BENCHMARK(bm_cosine<kernels::serial::pairwise_cosine>)->Name("cosine/serial")->Arg(1000)->Arg(4000);
BENCHMARK(bm_cosine<kernels::parallel::pairwise_cosine>)->Name("cosine/parallel")->Arg(1000)->Arg(4000);
BENCHMARK(bm_softmax<kernels::serial::row_softmax>)->Name("softmax/serial")->Arg(1000)->Arg(4000);
BENCHMARK(bm_softmax<kernels::parallel::row_softmax>)->Name("softmax/parallel")->Arg(1000)->Arg(4000);
BENCHMARK(bm_expected_distance<kernels::serial::expected_min_distance>)
    ->Name("expected_distance/serial")->Arg(500)->Arg(1000);
BENCHMARK(bm_expected_distance<kernels::parallel::expected_min_distance>)
    ->Name("expected_distance/parallel")->Arg(500)->Arg(1000);
BENCHMARK(bm_expected_distance_grad<kernels::serial::expected_min_distance_grad>)
    ->Name("expected_distance_grad/serial")->Arg(500)->Arg(1000);
BENCHMARK(bm_expected_distance_grad<kernels::parallel::expected_min_distance_grad>)
    ->Name("expected_distance_grad/parallel")->Arg(500)->Arg(1000);

BENCHMARK_MAIN();
