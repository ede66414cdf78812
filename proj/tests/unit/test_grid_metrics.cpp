// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "../support/helpers.hpp"
#include "pmc/grid_metrics.hpp"
#include "pmc/linear_likelihood.hpp"

using namespace pmc;

namespace {

GaussianMixture gauss2(const Vec& mean, const Mat& cov) {
  Vec w(1);
  w << 1.0;
  return GaussianMixture::dense(w, {mean}, {cov});
}

// Closed forms for Gaussian nu = N(m1, S1), pi = N(m2, S2):
//   KL = (tr(S2^-1 S1) + (m2-m1)' S2^-1 (m2-m1) - n + logdet S2 - logdet S1)/2
//   FI = E_nu || (S2^-1 - S1^-1) x + S1^-1 m1 - S2^-1 m2 ||^2
//      = tr(A S1 A') + || A m1 + b ||^2 with A = S2^-1 - S1^-1,
//        b = S1^-1 m1 - S2^-1 m2.
double gaussian_kl(const Vec& m1, const Mat& s1, const Vec& m2, const Mat& s2) {
  const int n = static_cast<int>(m1.size());
  const Mat s2i = s2.inverse();
  const Vec d = m2 - m1;
  return 0.5 * ((s2i * s1).trace() + d.dot(s2i * d) - n +
                std::log(s2.determinant() / s1.determinant()));
}

double gaussian_fi(const Vec& m1, const Mat& s1, const Vec& m2, const Mat& s2) {
  const Mat a = s2.inverse() - s1.inverse();
  const Vec b = s1.inverse() * m1 - s2.inverse() * m2;
  const Vec c = a * m1 + b;
  return (a * s1 * a.transpose()).trace() + c.squaredNorm();
}

}  // namespace

TEST_CASE("KL and FI vanish when nu equals pi") {
  Vec w(2);
  w << 0.5, 0.5;
  Vec m(2);
  m << 3.0, 2.0;
  Vec vars(2);
  vars << 2.0, 2.0;
  const auto mix = GaussianMixture::isotropic(w, {-m, m}, vars);
  const Grid2D grid{-25.0, 25.0, -25.0, 25.0, 500, 500};
  const PosteriorGrid post(nullptr, mix, grid);
  const auto metrics = grid_metrics(mix, post);
  CHECK(std::abs(metrics.kl.value) < 1e-6);
  CHECK(metrics.fi.value < 1e-6);
  CHECK(metrics.kl.clean());
}

TEST_CASE("unit-variance mean shift gives KL 1/2 and FI 1") {
  Vec m0 = Vec::Zero(2);
  Vec m1(2);
  m1 << 1.0, 0.0;
  const auto nu = gauss2(m0, Mat::Identity(2, 2));
  const auto pi = gauss2(m1, Mat::Identity(2, 2));
  const Grid2D grid{-12.0, 12.0, -12.0, 12.0, 480, 480};
  const PosteriorGrid post(nullptr, pi, grid);
  const auto metrics = grid_metrics(nu, post);
  CHECK(metrics.kl.value == doctest::Approx(0.5).epsilon(0.02));
  CHECK(metrics.fi.value == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("grid quadrature matches anisotropic Gaussian closed forms") {
  Vec m1(2), m2(2);
  m1 << 0.3, -0.2;
  m2 << 1.1, 0.6;
  Mat s1(2, 2), s2(2, 2);
  s1 << 1.0, 0.2, 0.2, 1.5;
  s2 << 2.0, -0.3, -0.3, 0.9;
  const auto nu = gauss2(m1, s1);
  const auto pi = gauss2(m2, s2);
  const Grid2D grid{-14.0, 14.0, -14.0, 14.0, 700, 700};
  const PosteriorGrid post(nullptr, pi, grid);
  const auto metrics = grid_metrics(nu, post);
  CHECK(metrics.kl.value ==
        doctest::Approx(gaussian_kl(m1, s1, m2, s2)).epsilon(0.02));
  CHECK(metrics.fi.value ==
        doctest::Approx(gaussian_fi(m1, s1, m2, s2)).epsilon(0.02));
}

TEST_CASE("quadrature error decreases with resolution") {
  Vec m0 = Vec::Zero(2);
  Vec m1(2);
  m1 << 1.0, 0.0;
  const auto nu = gauss2(m0, Mat::Identity(2, 2));
  const auto pi = gauss2(m1, Mat::Identity(2, 2));
  double prev_err = std::numeric_limits<double>::infinity();
  for (const int cells : {8, 16, 64}) {
    const Grid2D grid{-12.0, 12.0, -12.0, 12.0, cells, cells};
    const PosteriorGrid post(nullptr, pi, grid);
    const double err = std::abs(grid_kl(nu, post).value - 0.5);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 0.01);
}

TEST_CASE("posterior tabulation folds in the likelihood") {
  // Prior N(0, I), likelihood y = x + e with e ~ N(0, I), y = (2, 0):
  // posterior N(y/2, I/2).
  const auto prior = gauss2(Vec::Zero(2), Mat::Identity(2, 2));
  Vec y(2);
  y << 2.0, 0.0;
  GaussianLinearLikelihood lik(Mat::Identity(2, 2), y, 1.0);
  const Grid2D grid{-10.0, 10.0, -10.0, 10.0, 400, 400};
  const PosteriorGrid post(&lik, prior, grid);

  Vec pm(2);
  pm << 1.0, 0.0;
  const auto nu = gauss2(pm, 0.5 * Mat::Identity(2, 2));
  const auto metrics = grid_metrics(nu, post);
  CHECK(std::abs(metrics.kl.value) < 1e-6);
  CHECK(metrics.fi.value < 1e-6);
}

TEST_CASE("mass deficits raise warnings") {
  const auto centered = gauss2(Vec::Zero(2), Mat::Identity(2, 2));
  Vec far(2);
  far << 30.0, 30.0;
  const auto outside = gauss2(far, Mat::Identity(2, 2));
  const Grid2D grid{-5.0, 5.0, -5.0, 5.0, 100, 100};

  // nu off the grid.
  const PosteriorGrid post_ok(nullptr, centered, grid);
  CHECK(!grid_kl(outside, post_ok).clean());

  // posterior off the grid.
  const PosteriorGrid post_bad(nullptr, outside, grid);
  CHECK(post_bad.mass_ratio() < 0.999);
  CHECK(!grid_kl(centered, post_bad).clean());
}

TEST_CASE("grid validation") {
  Grid2D bad{1.0, -1.0, -1.0, 1.0, 10, 10};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Grid2D one{-1.0, 1.0, -1.0, 1.0, 1, 10};
  CHECK_THROWS_AS(one.validate(), std::invalid_argument);
}
