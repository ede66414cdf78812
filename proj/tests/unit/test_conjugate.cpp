// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "../support/helpers.hpp"
#include "pmc/conjugate.hpp"
#include "pmc/grid_metrics.hpp"

using namespace pmc;

TEST_CASE("scalar conjugate update") {
  Vec w(1);
  w << 1.0;
  const auto prior =
      GaussianMixture::dense(w, {Vec::Zero(1)}, {Mat::Identity(1, 1)});
  Mat a(1, 1);
  a << 1.0;
  Vec y(1);
  y << 2.0;
  GaussianLinearLikelihood lik(a, y, 1.0);
  const auto post = conjugate_posterior(prior, lik);
  CHECK(post.mean(0)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(post.covariance(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evidence concentrates the weights under a tight likelihood") {
  Vec w(2);
  w << 0.5, 0.5;
  Vec m1 = Vec::Constant(2, -3.0);
  Vec m2 = Vec::Constant(2, 3.0);
  const auto prior = GaussianMixture::dense(
      w, {m1, m2}, {Mat::Identity(2, 2), Mat::Identity(2, 2)});
  // Measurement generated exactly at mode 1 with a tiny noise level.
  GaussianLinearLikelihood lik(Mat::Identity(2, 2), m1, 1e-3);
  const auto post = conjugate_posterior(prior, lik);
  CHECK(post.weights()[0] > 1.0 - 1e-6);
}

TEST_CASE("oracle matches brute-force grid normalization within 1e-4 TV") {
  RngStream rng(2718, 0);
  Vec w(2);
  w << 0.35, 0.65;
  Vec m1(2), m2(2);
  m1 << -2.0, 1.0;
  m2 << 2.5, -1.5;
  const auto prior = GaussianMixture::dense(
      w, {m1, m2}, {test::random_spd(2, rng), test::random_spd(2, rng)});
  Mat a(2, 2);
  a << 0.9, 0.2, -0.3, 1.1;
  Vec y(2);
  y << 0.7, -0.4;
  GaussianLinearLikelihood lik(a, y, 0.8);

  const auto oracle = conjugate_posterior(prior, lik);
  const Grid2D grid{-12.0, 12.0, -12.0, 12.0, 600, 600};
  const PosteriorGrid post(&lik, prior, grid);

  double tv = 0.0;
  Vec x(2);
  for (int j = 0; j < grid.ny; ++j) {
    x[1] = grid.center_y(j);
    for (int i = 0; i < grid.nx; ++i) {
      x[0] = grid.center_x(i);
      const double nu = std::exp(oracle.logpdf(x));
      const double pi = std::exp(post.log_pi(j * grid.nx + i));
      tv += std::abs(nu - pi);
    }
  }
  tv *= 0.5 * grid.cell_area();
  CHECK(tv < 1e-4);
}

TEST_CASE("isotropic high-dimensional priors go through the same path") {
  const int n = 64, m = 24;
  RngStream rng(31, 4);
  Mat a(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal() / std::sqrt(n);
  }
  Vec w(2);
  w << 0.5, 0.5;
  Vec vars(2);
  vars << 1.0, 1.0;
  const Vec base = Vec::Constant(n, 0.25);
  const auto prior = GaussianMixture::isotropic(
      w, {base - Vec::Constant(n, 2.0), base + Vec::Constant(n, 2.0)}, vars);
  const Vec y = a * base;  // noiseless midpoint measurement
  GaussianLinearLikelihood lik(a, y, 0.1);
  const auto post = conjugate_posterior(prior, lik);
  // Symmetric evidence: weights stay balanced.
  CHECK(post.weights()[0] == doctest::Approx(0.5).epsilon(1e-9));
  // Posterior means keep the prior's null-space offset direction.
  CHECK((post.mean(1) - post.mean(0)).norm() > 1.0);
}
