#include <benchmark/benchmark.h>

#include <random>

#include "hdprec/bootstrap.hpp"
#include "hdprec/inference.hpp"
#include "hdprec/longrun.hpp"
#include "hdprec/simulate.hpp"

using namespace hdprec;

namespace {

Dataset sample(Index n, Index p) {
  DgpSpec dgp;
  dgp.p = p;
  dgp.n = n;
  dgp.rho = 0.2;
  dgp.rng = RngSpec{1, "bench"};
  return center(generate(dgp));
}

void BM_FitAll(benchmark::State& state) {
  const auto d = sample(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_all(d, LassoConfig{}));
}
BENCHMARK(BM_FitAll)->Args({150, 50})->Args({300, 100})->Args({300, 200})->Unit(benchmark::kMillisecond);

void BM_WDiag(benchmark::State& state) {
  const auto d = sample(state.range(0), state.range(1));
  const auto fitted = fit_precision(d, LassoConfig{});
  const auto s = index_set_all_offdiag(d.p());
  const EtaScores eta(fitted.fit.residuals, fitted.precision.v_hat, s);
  const Vector h = h_diag(fitted.precision.v_hat, s);
  const std::span<const double> hs(h.data(), static_cast<std::size_t>(h.size()));
  for (auto _ : state) benchmark::DoNotOptimize(w_diag(eta, hs, 4.0, KernelSpec{}));
  state.SetItemsProcessed(state.iterations() * s.r());
}
BENCHMARK(BM_WDiag)->Args({150, 50})->Args({300, 100})->Unit(benchmark::kMillisecond);

void BM_KmbDraws(benchmark::State& state) {
  const auto d = sample(state.range(0), state.range(1));
  const auto fitted = fit_precision(d, LassoConfig{});
  const auto region = prepare_region(fitted, index_set_all_offdiag(d.p()), PipelineConfig{});
  BootstrapConfig cfg;
  cfg.draws = state.range(2);
  cfg.bandwidth = region.longrun.bandwidth;
  for (auto _ : state) benchmark::DoNotOptimize(kmb_draws(region.eta, region.h(), cfg));
  state.SetItemsProcessed(state.iterations() * cfg.draws);
}
BENCHMARK(BM_KmbDraws)->Args({150, 50, 1000})->Args({300, 100, 1000})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
