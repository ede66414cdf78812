// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/helpers.hpp"
#include "pmc/em.hpp"

using namespace pmc;

TEST_CASE("single-component fit recovers the population MLE") {
  Mat samples(2, 1);
  samples << -1.0, 1.0;
  RngStream rng(1, 0);
  const auto fit = em_fit(samples, 1, rng);
  CHECK(fit.mixture.mean(0)[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.mixture.covariance(0)(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two separated modes are recovered from 5000 draws") {
  Vec w(2);
  w << 0.4, 0.6;
  Vec m1(2), m2(2);
  m1 << -4.0, -3.0;
  m2 << 4.0, 3.0;
  Mat c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.3, 0.3, 0.8;
  c2 << 0.6, -0.2, -0.2, 1.2;
  const auto truth = GaussianMixture::dense(w, {m1, m2}, {c1, c2});

  RngStream sample_rng(42, 0);
  Mat samples(5000, 2);
  for (int i = 0; i < samples.rows(); ++i) {
    samples.row(i) = truth.sample(sample_rng).transpose();
  }
  RngStream fit_rng(42, 1);
  const auto fit = em_fit(samples, 2, fit_rng);

  // Match fitted components to the truth by nearest mean.
  const int a = (fit.mixture.mean(0) - m1).norm() < (fit.mixture.mean(1) - m1).norm() ? 0 : 1;
  const int b = 1 - a;
  CHECK((fit.mixture.mean(a) - m1).norm() < 0.1);
  CHECK((fit.mixture.mean(b) - m2).norm() < 0.1);
  CHECK(fit.mixture.weights()[a] == doctest::Approx(0.4).epsilon(0.125));
  CHECK(std::abs(fit.mixture.weights()[a] - 0.4) < 0.05);
}

TEST_CASE("fits are deterministic under a fixed stream") {
  RngStream data_rng(7, 0);
  Mat samples(400, 2);
  for (int i = 0; i < samples.rows(); ++i) {
    samples(i, 0) = data_rng.normal();
    samples(i, 1) = 2.0 + 0.5 * data_rng.normal();
  }
  RngStream r1(9, 9), r2(9, 9);
  const auto f1 = em_fit(samples, 2, r1);
  const auto f2 = em_fit(samples, 2, r2);
  CHECK(f1.best_loglik == f2.best_loglik);
  CHECK((f1.mixture.mean(0) - f2.mixture.mean(0)).norm() == 0.0);
}

TEST_CASE("log-likelihood is nondecreasing in every restart") {
  RngStream data_rng(11, 0);
  Mat samples(800, 2);
  for (int i = 0; i < samples.rows(); ++i) {
    const double side = data_rng.uniform01() < 0.5 ? -3.0 : 3.0;
    samples(i, 0) = side + data_rng.normal();
    samples(i, 1) = 0.5 * side + data_rng.normal();
  }
  RngStream fit_rng(11, 1);
  const auto fit = em_fit(samples, 2, fit_rng);
  for (const auto& trace : fit.loglik_traces) {
    REQUIRE(!trace.empty());
    for (size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] >= trace[i - 1] - 1e-9 * (1.0 + std::abs(trace[i - 1])));
    }
  }
  CHECK(fit.best_loglik ==
        *std::max_element(
            fit.loglik_traces[fit.best_restart].begin(),
            fit.loglik_traces[fit.best_restart].end()));
}

TEST_CASE("degenerate sample sets are rejected") {
  Mat tiny(3, 2);
  tiny.setZero();
  RngStream rng(1, 1);
  CHECK_THROWS_AS(em_fit(tiny, 2, rng), std::invalid_argument);
  Mat nan_mat(10, 1);
  nan_mat.setConstant(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(em_fit(nan_mat, 1, rng), std::invalid_argument);
}
