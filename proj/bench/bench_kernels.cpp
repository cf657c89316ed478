#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rloss/kernels.hpp"

namespace {

struct Problem {
  std::size_t n, m;
  std::vector<double> values, weights, dist, at_z;
};

Problem make_problem(std::size_t n, std::size_t m) {
  Problem p{n, m, std::vector<double>(n * m), std::vector<double>(m), std::vector<double>(n * n),
            std::vector<double>(n)};
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (auto& v : p.values) v = u(gen);
  for (auto& w : p.weights) w = 1.0 + std::floor(4.0 * u(gen));
  for (auto& z : p.at_z) z = u(gen);
  rloss::kernels::pairwise_sq_distances_serial(p.values, n, m, p.weights, p.dist);
  return p;
}

template <bool Parallel>
void BM_PairwiseDistances(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    if constexpr (Parallel) rloss::kernels::pairwise_sq_distances(p.values, p.n, p.m, p.weights, p.dist);
    else rloss::kernels::pairwise_sq_distances_serial(p.values, p.n, p.m, p.weights, p.dist);
    benchmark::DoNotOptimize(p.dist.data());
  }
}

template <bool Parallel>
void BM_SensitivitySup(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    double s = Parallel ? rloss::kernels::sensitivity_sup(p.at_z, p.dist, 1e4, 1.0)
                        : rloss::kernels::sensitivity_sup_serial(p.at_z, p.dist, 1e4, 1.0);
    benchmark::DoNotOptimize(s);
  }
}

template <bool Parallel>
void BM_ConstrainedPairMax(benchmark::State& state) {
  auto p = make_problem(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    auto r = Parallel ? rloss::kernels::constrained_pair_max(p.at_z, p.dist, 40.0)
                      : rloss::kernels::constrained_pair_max_serial(p.at_z, p.dist, 40.0);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_PairwiseDistances<false>)->Arg(64)->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(BM_PairwiseDistances<true>)->Arg(64)->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(BM_SensitivitySup<false>)->Arg(256)->Arg(1024)->Arg(2048)->UseRealTime();
BENCHMARK(BM_SensitivitySup<true>)->Arg(256)->Arg(1024)->Arg(2048)->UseRealTime();
BENCHMARK(BM_ConstrainedPairMax<false>)->Arg(256)->Arg(1024)->Arg(2048)->UseRealTime();
BENCHMARK(BM_ConstrainedPairMax<true>)->Arg(256)->Arg(1024)->Arg(2048)->UseRealTime();

BENCHMARK_MAIN();
