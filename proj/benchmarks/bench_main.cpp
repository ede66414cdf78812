// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pmc/closure_likelihood.hpp"
#include "pmc/em.hpp"
#include "pmc/grid_metrics.hpp"
#include "pmc/linear_likelihood.hpp"
#include "pmc/sampler.hpp"

namespace {

pmc::GaussianMixture bimodal2d() {
  pmc::Vec w(2);
  w << 0.5, 0.5;
  pmc::Vec m(2);
  m << 6.0, 6.0;
  pmc::Vec vars(2);
  vars << 4.0, 4.0;
  return pmc::GaussianMixture::isotropic(w, {-m, m}, vars);
}

void BM_GmmScore2d(benchmark::State& state) {
  const auto gmm = bimodal2d();
  pmc::RngStream rng(1, 0);
  pmc::Vec x(2), out(2);
  x << 1.0, -2.0;
  for (auto _ : state) {
    gmm.score_into(x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_GmmScore2d);

void BM_SmoothedScore2d(benchmark::State& state) {
  const pmc::ScoreModel score = pmc::ScoreModel::exact(bimodal2d());
  pmc::RngStream rng(1, 0);
  pmc::Vec x(2), out(2);
  x << 1.0, -2.0;
  for (auto _ : state) {
    score.eval_into(x, 3.0, rng, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SmoothedScore2d);

void BM_RedStep1024(benchmark::State& state) {
  const int n = 1024, m = 307;
  pmc::RngStream rng(7, 0);
  pmc::Mat a(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal() / 32.0;
  }
  pmc::GaussianLinearLikelihood lik(a, pmc::Vec::Zero(m), 0.1);
  pmc::Vec base1 = pmc::Vec::Constant(n, -2.0);
  pmc::Vec base2 = pmc::Vec::Constant(n, 2.0);
  pmc::Vec w(2), vars(2);
  w << 0.5, 0.5;
  vars << 1.0, 1.0;
  const pmc::ScoreModel score = pmc::ScoreModel::exact(
      pmc::GaussianMixture::isotropic(w, {base1, base2}, vars));
  pmc::Vec x = pmc::Vec::Zero(n);
  for (auto _ : state) {
    x = pmc::pmc_red_step(x, lik, score, 1e-3, 0.5, 1.0, rng, false);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_RedStep1024);

void BM_ClosureGrad(benchmark::State& state) {
  const auto ins = pmc::ring_instrument(9, 4, 16, 16, 5.0, 0.25);
  pmc::Vec truth = pmc::Vec::Constant(256, 0.1);
  truth[60] = 1.0;
  pmc::RngStream rng(3, 0);
  const auto lik = pmc::simulate_measurements(truth, ins, 0.05, 0.05, 0.5, 0.1,
                                              0.5, 0.01, rng);
  pmc::LikScratch scratch;
  pmc::Vec g(256);
  for (auto _ : state) {
    lik.grad_into(truth, g, scratch);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_ClosureGrad);

void BM_GridMetrics(benchmark::State& state) {
  const auto prior = bimodal2d();
  const pmc::Grid2D grid{-50, 50, -50, 50, static_cast<int>(state.range(0)),
                         static_cast<int>(state.range(0))};
  const pmc::PosteriorGrid post(nullptr, prior, grid);
  for (auto _ : state) {
    const auto m = pmc::grid_metrics(prior, post);
    benchmark::DoNotOptimize(m.kl.value);
  }
}
BENCHMARK(BM_GridMetrics)->Arg(250)->Arg(1000);

void BM_EmFit(benchmark::State& state) {
  const auto prior = bimodal2d();
  pmc::RngStream rng(11, 0);
  pmc::Mat samples(1000, 2);
  for (int i = 0; i < samples.rows(); ++i) {
    samples.row(i) = prior.sample(rng).transpose();
  }
  for (auto _ : state) {
    pmc::RngStream fit_rng(11, 1);
    const auto fit = pmc::em_fit(samples, 2, fit_rng);
    benchmark::DoNotOptimize(fit.best_loglik);
  }
}
BENCHMARK(BM_EmFit);

}  // namespace

BENCHMARK_MAIN();
