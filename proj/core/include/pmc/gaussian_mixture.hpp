// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_GAUSSIAN_MIXTURE_HPP
#define PMC_GAUSSIAN_MIXTURE_HPP

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "pmc/rng.hpp"

namespace pmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Finite mixture of Gaussians with precomputed Cholesky factors.
///
/// The same type serves as analytic prior, EM-fitted sample density and
/// closed-form conjugate posterior. Components either share a dense
/// covariance representation or an isotropic one (variance * I); isotropic
/// storage keeps high-dimensional image priors O(n) per evaluation.
/// Instances are immutable after construction and safe to share across
/// concurrently running chains.
class GaussianMixture {
 public:
  enum class CovKind { Dense, Isotropic };

  /// Dense-covariance mixture. Weights must be nonnegative and sum to one
  /// (1e-12 tolerance); every covariance must be symmetric positive definite.
  static GaussianMixture dense(Vec weights, std::vector<Vec> means,
                               std::vector<Mat> covariances);

  /// Isotropic mixture with per-component covariance variances[k] * I.
  static GaussianMixture isotropic(Vec weights, std::vector<Vec> means,
                                   Vec variances);

  int components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_.front().size()); }
  CovKind cov_kind() const { return kind_; }

  const Vec& weights() const { return weights_; }
  double log_weight(int k) const { return log_weights_[k]; }
  const Vec& mean(int k) const { return means_[k]; }

  /// Materializes the covariance of component k as a dense matrix.
  Mat covariance(int k) const;
  /// Isotropic variance of component k; valid only for isotropic mixtures.
  double iso_variance(int k) const { return iso_vars_[k]; }

  /// log p(x) computed with log-sum-exp across components.
  double logpdf(const Vec& x) const;

  /// Score of the mixture, grad log p(x) = sum_k r_k(x) Sigma_k^-1 (m_k - x).
  Vec score(const Vec& x) const;
  void score_into(const Vec& x, Vec& out) const;

  /// log N(x; m_k, Sigma_k) for a single component.
  double component_logpdf(int k, const Vec& x) const;

  /// Draws a component index from the weights, then a Gaussian sample.
  Vec sample(RngStream& rng) const;

  /// Responsibilities r_k(x) (posterior component probabilities).
  Vec responsibilities(const Vec& x) const;

  /// Mixture log-likelihood of a set of samples (rows are points).
  double total_logpdf(const Mat& rows) const;

  nlohmann::json to_json() const;
  /// Accepts {"weights": [...], "means": [[...]], "covariances": [[[...]]]};
  /// a covariance entry may also be a scalar (isotropic) or a vector
  /// (diagonal), both of which are stored densely unless all are scalars.
  static GaussianMixture from_json(const nlohmann::json& j);

 private:
  GaussianMixture() = default;
  void validate_and_finish();

  CovKind kind_ = CovKind::Dense;
  Vec weights_;
  std::vector<double> log_weights_;
  std::vector<Vec> means_;

  // Dense storage.
  std::vector<Mat> covs_;
  std::vector<Eigen::LLT<Mat>> llts_;
  std::vector<double> log_norms_;  // -(n/2) log(2 pi) - (1/2) log det Sigma

  // Isotropic storage.
  Vec iso_vars_;
};

/// Free-function spellings mirroring the mixture operations.
inline double gmm_logpdf(const GaussianMixture& g, const Vec& x) {
  return g.logpdf(x);
}
inline Vec gmm_score(const GaussianMixture& g, const Vec& x) {
  return g.score(x);
}
inline Vec gmm_sample(const GaussianMixture& g, RngStream& rng) {
  return g.sample(rng);
}

/// Throws std::invalid_argument if v contains NaN or Inf.
void ensure_finite(const Vec& v, const char* context);

}  // namespace pmc

#endif  // PMC_GAUSSIAN_MIXTURE_HPP
