// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/conjugate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double log_gaussian(const Vec& resid, const Eigen::LLT<Mat>& llt, int m) {
  double logdet = 0.0;
  for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (m * kLog2Pi + logdet +
                 llt.matrixL().solve(resid).squaredNorm());
}
}  // namespace

GaussianMixture conjugate_posterior(const GaussianMixture& prior,
                                    const GaussianLinearLikelihood& lik) {
  const int n = prior.dim();
  const int m = lik.measurements();
  if (lik.dim() != n) {
    throw std::invalid_argument("conjugate_posterior: dimension mismatch");
  }
  const double b2 = lik.beta() * lik.beta();
  const Mat& a = lik.a();
  const Mat ata = a.transpose() * a;
  const int k = prior.components();

  Vec log_w(k);
  std::vector<Vec> means(k);
  std::vector<Mat> covs(k);
  for (int c = 0; c < k; ++c) {
    const Mat prior_cov = prior.covariance(c);
    const Eigen::LLT<Mat> prior_llt(prior_cov);
    if (prior_llt.info() != Eigen::Success) {
      throw std::runtime_error("conjugate_posterior: prior covariance not PD");
    }
    // Posterior precision and moments.
    const Mat precision =
        prior_llt.solve(Mat::Identity(n, n)) + ata / b2;
    const Eigen::LLT<Mat> post_llt(precision);
    if (post_llt.info() != Eigen::Success) {
      throw std::runtime_error(
          "conjugate_posterior: posterior precision not PD");
    }
    covs[c] = post_llt.solve(Mat::Identity(n, n));
    const Vec info_vec =
        prior_llt.solve(prior.mean(c)) + a.transpose() * lik.y() / b2;
    means[c] = post_llt.solve(info_vec);

    // Marginal evidence of y under component c.
    Mat marginal = a * prior_cov * a.transpose();
    marginal.diagonal().array() += b2;
    const Eigen::LLT<Mat> marg_llt(marginal);
    if (marg_llt.info() != Eigen::Success) {
      throw std::runtime_error(
          "conjugate_posterior: marginal covariance not PD");
    }
    const Vec resid = lik.y() - a * prior.mean(c);
    log_w[c] = (prior.weights()[c] > 0.0
                    ? std::log(prior.weights()[c])
                    : -std::numeric_limits<double>::infinity()) +
               log_gaussian(resid, marg_llt, m);
  }

  const double lmax = log_w.maxCoeff();
  Vec w = (log_w.array() - lmax).exp();
  w /= w.sum();
  return GaussianMixture::dense(std::move(w), std::move(means),
                                std::move(covs));
}

}  // namespace pmc
