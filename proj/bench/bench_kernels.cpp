#include <benchmark/benchmark.h>

#include "invlab/kernels.hpp"
#include "invlab/rng.hpp"

namespace {

invlab::RowMat random_rows(int n, int d) {
  invlab::Rng rng(42);
  invlab::RowMat z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
  return z;
}

void BM_GramSerial(benchmark::State& state) {
  const auto z = random_rows(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(invlab::gram_serial(z));
}

void BM_GramParallel(benchmark::State& state) {
  const auto z = random_rows(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(invlab::gram_parallel(z));
}

void monte_carlo_args(benchmark::internal::Benchmark* b) {
  for (int d : {10, 100}) b->Args({d, 1 << 18});
}

template <bool Parallel>
void BM_MonteCarlo(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  invlab::Rng rng(7);
  invlab::Vec w(d), mu_c = invlab::Vec::Zero(d), mu_s = invlab::Vec::Zero(d);
  for (int j = 0; j < d; ++j) w[j] = rng.normal();
  mu_c[0] = 1.0;
  mu_s[1] = 2.0;
  for (auto _ : state) {
    const auto r = Parallel ? invlab::monte_carlo_error_parallel(w, mu_c, mu_s, 1.0, 0.3, state.range(1), 1)
                            : invlab::monte_carlo_error_serial(w, mu_c, mu_s, 1.0, 0.3, state.range(1), 1);
    benchmark::DoNotOptimize(r.errors);
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

}  // namespace

BENCHMARK(BM_GramSerial)->Args({180, 1000})->Args({180, 10000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Args({180, 1000})->Args({180, 10000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo<false>)->Apply(monte_carlo_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo<true>)->Apply(monte_carlo_args)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
