#include <benchmark/benchmark.h>

#include "topol/kernels.hpp"
#include "topol/rng.hpp"

namespace {

using namespace topol;

MatrixF random_rows(std::size_t n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  MatrixF x(n, m);
  for (auto& v : x.values()) v = static_cast<float>(gaussian(rng));
  return x;
}

void BM_knn(benchmark::State& state, bool parallel) {
  const auto x = random_rows(static_cast<std::size_t>(state.range(0)), 64, 1);
  manifold::KnnGraph g;
  for (auto _ : state) {
    if (parallel)
      kernels::knn_parallel(x, x, 15, manifold::Metric::cosine, true, g);
    else
      kernels::knn_serial(x, x, 15, manifold::Metric::cosine, true, g);
    benchmark::DoNotOptimize(g.index.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct NullFixture {
  MatrixD coords;
  std::vector<std::uint32_t> community;
  std::vector<corpus::Regime> regimes;

  explicit NullFixture(std::size_t n) : coords(random_rows(n, 50, 2).cast<double>()) {
    community.resize(n);
    regimes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      community[i] = static_cast<std::uint32_t>(i % 10);
      regimes[i] = (i / 10) % 2 ? corpus::Regime::B : corpus::Regime::A;
    }
  }

  kernels::NullProblem problem(std::size_t permutations) const {
    kernels::NullProblem p;
    p.coords = &coords;
    p.community = community;
    p.n_communities = 10;
    p.regimes = regimes;
    p.permutations = permutations;
    p.seed = 7;
    return p;
  }
};

void BM_null(benchmark::State& state, bool parallel) {
  const NullFixture fx(static_cast<std::size_t>(state.range(0)));
  const auto p = fx.problem(200);
  for (auto _ : state) {
    auto draws = parallel ? kernels::permutation_null_parallel(p) : kernels::permutation_null_serial(p);
    benchmark::DoNotOptimize(draws.data());
  }
  state.SetItemsProcessed(state.iterations() * 200);
}

}  // namespace

BENCHMARK_CAPTURE(BM_knn, serial, false)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_knn, parallel, true)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_null, serial, false)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_null, parallel, true)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
