// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_LINEAR_LIKELIHOOD_HPP
#define PMC_LINEAR_LIKELIHOOD_HPP

#include <optional>

#include "pmc/likelihood.hpp"

namespace pmc {

/// Gaussian linear model y = A x + e, e ~ N(0, beta^2 I):
/// g(x) = ||y - A x||^2 / (2 beta^2), grad g(x) = A^T (A x - y) / beta^2.
class GaussianLinearLikelihood final : public Likelihood {
 public:
  GaussianLinearLikelihood(Mat a, Vec y, double beta,
                           std::optional<double> r_g = std::nullopt);

  int dim() const override { return static_cast<int>(a_.cols()); }
  int measurements() const { return static_cast<int>(a_.rows()); }
  const Mat& a() const { return a_; }
  const Vec& y() const { return y_; }
  double beta() const { return beta_; }
  std::optional<double> clip_radius() const override { return r_g_; }

  double value(const Vec& x, LikScratch& scratch) const override;
  void grad_into(const Vec& x, Vec& out, LikScratch& scratch) const override;

 private:
  Mat a_;
  Vec y_;
  double beta_;
  std::optional<double> r_g_;
};

/// Exact-signature spelling of the gradient operation.
inline Vec linear_grad(const GaussianLinearLikelihood& lik, const Vec& x) {
  return lik.grad(x);
}

}  // namespace pmc

#endif  // PMC_LINEAR_LIKELIHOOD_HPP
