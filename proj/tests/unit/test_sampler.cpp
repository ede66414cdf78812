// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "../support/helpers.hpp"
#include "pmc/linear_likelihood.hpp"
#include "pmc/sampler.hpp"

using namespace pmc;

namespace {

GaussianMixture gauss1d(double mean, double var) {
  Vec w(1);
  w << 1.0;
  Vec m(1);
  m << mean;
  Mat c(1, 1);
  c << var;
  return GaussianMixture::dense(w, {m}, {c});
}

GaussianMixture gauss_iso(int n, double mean, double var) {
  Vec w(1);
  w << 1.0;
  Vec vars(1);
  vars << var;
  return GaussianMixture::isotropic(w, {Vec::Constant(n, mean)}, vars);
}

}  // namespace

TEST_CASE("exponential schedule values") {
  AnnealingSchedule s{10.0, 0.975, 0.0, 10.0};
  const auto [sigma0, alpha0] = schedule_at(s, 0);
  CHECK(sigma0 == doctest::Approx(10.0));
  CHECK(alpha0 == doctest::Approx(1000.0));

  const auto [sigma_late, alpha_late] = schedule_at(s, 2000);
  CHECK(sigma_late < 1e-8);
  CHECK(alpha_late == doctest::Approx(1.0));

  AnnealingSchedule floored{10.0, 0.975, 0.2, 25.0};
  const auto [sigma_t, alpha_t] = schedule_at(floored, 100000);
  CHECK(sigma_t == doctest::Approx(0.2));
  CHECK(alpha_t == doctest::Approx(1.0));
}

TEST_CASE("schedule is monotone and alpha pins to one after the knee") {
  AnnealingSchedule s{10.0, 0.95, 0.05, 8.0};
  s.validate();
  double prev_sigma = std::numeric_limits<double>::infinity();
  double prev_alpha = std::numeric_limits<double>::infinity();
  bool hit_one = false;
  for (int k = 0; k < 400; ++k) {
    const auto [sigma, alpha] = s.at(k);
    CHECK(sigma <= prev_sigma);
    CHECK(alpha <= prev_alpha);
    CHECK(alpha >= 1.0);
    CHECK(sigma >= s.sigma_min);
    if (s.alpha0 * sigma * sigma <= 1.0) hit_one = true;
    if (hit_one) CHECK(alpha == 1.0);
    prev_sigma = sigma;
    prev_alpha = alpha;
  }
  CHECK(hit_one);
}

TEST_CASE("schedule validation rejects alpha0 above 1/sigma_min^2") {
  AnnealingSchedule s{10.0, 0.975, 0.4, 10.0};  // 1/0.16 = 6.25 < 10
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("deterministic step at a stationary point stays put") {
  const auto lik = test::zero_likelihood(2);
  const auto score = ScoreModel::exact(gauss_iso(2, 0.0, 1.0));
  RngStream rng(1, 0);
  const Vec x = Vec::Zero(2);  // score and gradient both vanish here
  const Vec next = pmc_red_step(x, lik, score, 0.3, 0.5, 1.0, rng, true);
  CHECK(next.norm() == 0.0);
}

TEST_CASE("stochastic increments carry variance 2 gamma") {
  const auto lik = test::zero_likelihood(2);
  const auto score = ScoreModel::exact(gauss_iso(2, 0.0, 1.0));
  RngStream rng(2, 0);
  const double gamma = 0.5;
  const int n = 20000;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec next =
        pmc_red_step(Vec::Zero(2), lik, score, gamma, 0.0, 1.0, rng, false);
    sq += next.squaredNorm();
  }
  const double var_per_coord = sq / (2.0 * n);
  CHECK(var_per_coord == doctest::Approx(2.0 * gamma).epsilon(0.05));
}

TEST_CASE("RED update hand value") {
  // grad g(0) = 1 via A=1, y=-1, beta=1; S(0, 0) = -1 via prior N(-1, 1).
  Mat a(1, 1);
  a << 1.0;
  Vec y(1);
  y << -1.0;
  GaussianLinearLikelihood lik(a, y, 1.0);
  const auto score = ScoreModel::exact(gauss1d(-1.0, 1.0));
  RngStream rng(3, 0);
  const Vec next =
      pmc_red_step(Vec::Zero(1), lik, score, 0.1, 0.0, 2.0, rng, true);
  // 0 - 0.1 * (1 - 2 * (-1)) = -0.3
  CHECK(next[0] == doctest::Approx(-0.3).epsilon(1e-14));
}

TEST_CASE("PnP update hand value with the shifted score argument") {
  // grad g == 1 everywhere; S(u, 0) = -u via prior N(0, 1).
  test::FnLikelihood lik(
      1, [](const Vec& x) { return x[0]; },
      [](const Vec&) { return Vec::Ones(1); });
  const auto score = ScoreModel::exact(gauss1d(0.0, 1.0));
  RngStream rng(4, 0);
  const Vec next =
      pmc_pnp_step(Vec::Zero(1), lik, score, 0.1, 0.0, 1.0, rng, true);
  // 0 - 0.1 * (1 - S(-0.1)) = -0.1 * (1 - 0.1) = -0.09
  CHECK(next[0] == doctest::Approx(-0.09).epsilon(1e-14));
}

TEST_CASE("PnP equals RED when the likelihood gradient vanishes") {
  const auto lik = test::zero_likelihood(2);
  const auto score = ScoreModel::exact(gauss_iso(2, 1.0, 2.0));
  RngStream r1(5, 0), r2(5, 0);
  Vec x = Vec::Constant(2, 0.3);
  for (int k = 0; k < 25; ++k) {
    const Vec a = pmc_pnp_step(x, lik, score, 0.05, 0.2, 1.5, r1, false);
    const Vec b = pmc_red_step(x, lik, score, 0.05, 0.2, 1.5, r2, false);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    x = a;
  }
}

TEST_CASE("step preconditions") {
  const auto lik = test::zero_likelihood(1);
  const auto score = ScoreModel::exact(gauss1d(0.0, 1.0));
  RngStream rng(6, 0);
  CHECK_THROWS_AS(
      pmc_red_step(Vec::Zero(1), lik, score, 0.0, 0.1, 1.0, rng, true),
      std::invalid_argument);
  CHECK_THROWS_AS(
      pmc_red_step(Vec::Zero(1), lik, score, 0.1, -0.1, 1.0, rng, true),
      std::invalid_argument);
  CHECK_THROWS_AS(
      pmc_red_step(Vec::Zero(1), lik, score, 0.1, 0.1, 0.5, rng, true),
      std::invalid_argument);
}

TEST_CASE("config validation") {
  ChainConfig cfg;
  cfg.gamma = 0.1;
  cfg.n_iters = 0;
  cfg.batch = 10;
  cfg.init_lo = -1;
  cfg.init_hi = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.n_iters = 5;
  cfg.alpha_static = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.alpha_static = 1.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("annealed path with constant knobs matches the stationary path") {
  // sigma0 = sigma_min pins sigma_k; alpha0 * sigma^2 <= 1 pins alpha_k = 1.
  const auto score = ScoreModel::exact(gauss_iso(2, 0.5, 1.5));
  Mat a = Mat::Identity(2, 2);
  GaussianLinearLikelihood lik(a, Vec::Ones(2), 1.0);

  ChainConfig annealed;
  annealed.gamma = 0.05;
  annealed.n_iters = 60;
  annealed.batch = 8;
  annealed.seed = 99;
  annealed.discretization = Discretization::Pnp;
  annealed.annealed = true;
  annealed.schedule = {0.5, 0.9, 0.5, 1.0 / 0.25};
  annealed.init_lo = -2.0;
  annealed.init_hi = 2.0;

  ChainConfig stationary = annealed;
  stationary.annealed = false;
  stationary.sigma_static = 0.5;
  stationary.alpha_static = 1.0;

  const SampleBatch ba = run_batch(annealed, lik, score);
  const SampleBatch bs = run_batch(stationary, lik, score);
  CHECK((ba.samples.array() == bs.samples.array()).all());
}

TEST_CASE("deterministic RED descends the composite objective") {
  Mat a(2, 2);
  a << 1.0, 0.2, -0.1, 0.8;
  Vec y(2);
  y << 0.5, -0.3;
  GaussianLinearLikelihood lik(a, y, 1.0);
  const auto prior = gauss_iso(2, 0.0, 2.0);
  const auto score = ScoreModel::exact(prior);
  const SmoothedGmm smoothed(prior);
  const double sigma = 0.3, alpha = 1.0, gamma = 1e-2;

  LikScratch scratch;
  Vec x = Vec::Constant(2, 3.0);
  RngStream rng(7, 0);
  double prev = lik.value(x, scratch) - alpha * smoothed.logpdf(x, sigma);
  for (int k = 0; k < 200; ++k) {
    x = pmc_red_step(x, lik, score, gamma, sigma, alpha, rng, true);
    const double obj = lik.value(x, scratch) - alpha * smoothed.logpdf(x, sigma);
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
}

TEST_CASE("batch runs are reproducible and thread-count invariant") {
  const auto score = ScoreModel::exact(gauss_iso(3, 0.0, 1.0));
  GaussianLinearLikelihood lik(Mat::Identity(3, 3), Vec::Ones(3), 1.0);
  ChainConfig cfg;
  cfg.gamma = 0.02;
  cfg.n_iters = 40;
  cfg.batch = 9;
  cfg.seed = 1234;
  cfg.discretization = Discretization::Red;
  cfg.sigma_static = 0.1;
  cfg.init_lo = -3.0;
  cfg.init_hi = 3.0;
  cfg.snapshot_every = 10;

  const SampleBatch a = run_batch(cfg, lik, score, 1);
  const SampleBatch b = run_batch(cfg, lik, score, 1);
  const SampleBatch c = run_batch(cfg, lik, score, 3);
  CHECK((a.samples.array() == b.samples.array()).all());
  CHECK((a.samples.array() == c.samples.array()).all());
  CHECK(a.config_digest == b.config_digest);
  REQUIRE(a.snapshots.size() == 4);
  CHECK(a.snapshots.back().iteration == 40);
  CHECK((a.snapshots.front().state.array() == c.snapshots.front().state.array()).all());
}

TEST_CASE("a diverging chain is recorded and does not poison the batch") {
  // Gradient blows up past a threshold; chains starting there die.
  test::FnLikelihood lik(
      1, [](const Vec&) { return 0.0; },
      [](const Vec& x) {
        Vec g(1);
        g[0] = x[0] > 3.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        return g;
      });
  const auto score = ScoreModel::exact(gauss1d(0.0, 100.0));
  ChainConfig cfg;
  cfg.gamma = 0.01;
  cfg.n_iters = 30;
  cfg.batch = 64;
  cfg.seed = 5150;
  cfg.discretization = Discretization::Red;
  cfg.sigma_static = 0.0;
  cfg.init_lo = -5.0;
  cfg.init_hi = 5.0;

  const SampleBatch batch = run_batch(cfg, lik, score);
  CHECK(!batch.divergences.empty());
  CHECK(batch.divergences.size() < 64);
  CHECK(batch.samples.allFinite());  // dead rows keep their last finite state
  const auto mask = batch.alive_mask();
  int alive = 0;
  for (bool b : mask) alive += b ? 1 : 0;
  CHECK(alive == 64 - static_cast<int>(batch.divergences.size()));
}

TEST_CASE("run_batch rejects invalid configs") {
  const auto score = ScoreModel::exact(gauss1d(0.0, 1.0));
  GaussianLinearLikelihood lik(Mat::Identity(1, 1), Vec::Zero(1), 1.0);
  ChainConfig cfg;
  cfg.gamma = 0.1;
  cfg.n_iters = 0;  // N >= 1 required
  cfg.batch = 4;
  cfg.init_lo = -1.0;
  cfg.init_hi = 1.0;
  CHECK_THROWS_AS(run_batch(cfg, lik, score), std::invalid_argument);
}

TEST_CASE("PnP and RED discretize the same diffusion at small step size") {
  Mat a(2, 2);
  a << 1.0, 0.3, -0.2, 0.9;
  Vec y(2);
  y << 0.8, -0.5;
  GaussianLinearLikelihood lik(a, y, 1.0);
  const auto score = ScoreModel::exact(gauss_iso(2, 0.0, 1.0));

  ChainConfig cfg;
  cfg.gamma = 2e-3;
  cfg.n_iters = 8000;
  cfg.batch = 400;
  cfg.seed = 271828;
  cfg.sigma_static = 0.0;
  cfg.init_lo = -2.0;
  cfg.init_hi = 2.0;

  cfg.discretization = Discretization::Pnp;
  const SampleBatch pnp = run_batch(cfg, lik, score);
  cfg.discretization = Discretization::Red;
  const SampleBatch red = run_batch(cfg, lik, score);

  for (int j = 0; j < 2; ++j) {
    const double mp = pnp.samples.col(j).mean();
    const double mr = red.samples.col(j).mean();
    const double vp =
        (pnp.samples.col(j).array() - mp).square().sum() / (cfg.batch - 1);
    const double vr =
        (red.samples.col(j).array() - mr).square().sum() / (cfg.batch - 1);
    const double se = std::sqrt(vp / cfg.batch + vr / cfg.batch);
    CHECK(std::abs(mp - mr) <= 2.0 * se);
  }
}

TEST_CASE("conjugate 1D posterior sanity run") {
  // Prior N(0,1), y = x + e with y = 2: posterior N(1, 1/2).
  Mat a(1, 1);
  a << 1.0;
  Vec y(1);
  y << 2.0;
  GaussianLinearLikelihood lik(a, y, 1.0);
  const auto score = ScoreModel::exact(gauss1d(0.0, 1.0));

  ChainConfig cfg;
  cfg.gamma = 2e-3;
  cfg.n_iters = 30000;
  cfg.batch = 300;
  cfg.seed = 808;
  cfg.discretization = Discretization::Red;
  cfg.sigma_static = 0.0;
  cfg.init_lo = -2.0;
  cfg.init_hi = 2.0;

  const SampleBatch batch = run_batch(cfg, lik, score);
  const double mean = batch.samples.col(0).mean();
  const double var =
      (batch.samples.col(0).array() - mean).square().sum() / (cfg.batch - 1);
  CHECK(mean == doctest::Approx(1.0).epsilon(0.15));
  CHECK(var == doctest::Approx(0.5).epsilon(0.2));
}
