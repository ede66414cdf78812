// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_SCORE_MODEL_HPP
#define PMC_SCORE_MODEL_HPP

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

#include "pmc/gaussian_mixture.hpp"
#include "pmc/rng.hpp"

namespace pmc {

/// Evaluates the Gaussian mixture smoothed by an isotropic kernel of width
/// sigma: the same mixture with every covariance inflated to Sigma_k +
/// sigma^2 I. Dense covariances are eigendecomposed once at construction so
/// inflation never refactorizes anything; per-call cost is O(K n^2) dense and
/// O(K n) isotropic.
class SmoothedGmm {
 public:
  explicit SmoothedGmm(GaussianMixture base);

  const GaussianMixture& base() const { return base_; }
  int dim() const { return base_.dim(); }

  /// log p_sigma(x).
  double logpdf(const Vec& x, double sigma) const;

  /// grad log p_sigma(x). sigma == 0 falls back to the base mixture score.
  void score_into(const Vec& x, double sigma, Vec& out) const;
  Vec score(const Vec& x, double sigma) const;

  /// Posterior mean E[z | x] for z ~ base mixture, x = z + N(0, sigma^2 I).
  /// Requires sigma > 0.
  Vec denoise(const Vec& x, double sigma) const;

 private:
  struct Spectral {
    Mat q;        // eigenvectors (dense components only)
    Vec lambda;   // eigenvalues, or the single isotropic variance
  };
  // Log-density of component k of the sigma-inflated mixture, plus the
  // whitened residual needed by score/denoise.
  double component_logpdf(int k, const Vec& x, double sigma, Vec& u) const;

  GaussianMixture base_;
  std::vector<Spectral> spectral_;
};

/// Score oracle S(x, sigma) for grad log p_sigma(x).
///
/// kind exact_gmm evaluates the analytic smoothed-mixture score. kind
/// noisy_gmm perturbs that exact value with white Gaussian noise truncated
/// to norm <= eps_max, emulating a score network with a bounded pointwise
/// error. An optional clip radius r_s rescales the final output to norm
/// <= r_s. Evaluation is pure given (x, sigma, rng); concurrent calls are
/// fine as long as each caller owns its stream.
class ScoreModel {
 public:
  enum class Kind { ExactGmm, NoisyGmm };

  /// noise_std is the per-coordinate deviation of the pre-truncation noise;
  /// it defaults to eps_max / sqrt(n) so the typical perturbation norm sits
  /// at the eps_max bound.
  ScoreModel(Kind kind, GaussianMixture base, double eps_max = 0.0,
             std::optional<double> r_s = std::nullopt,
             std::optional<double> noise_std = std::nullopt);

  static ScoreModel exact(GaussianMixture base,
                          std::optional<double> r_s = std::nullopt);
  static ScoreModel noisy(GaussianMixture base, double eps_max,
                          std::optional<double> r_s = std::nullopt,
                          std::optional<double> noise_std = std::nullopt);

  Kind kind() const { return kind_; }
  double eps_max() const { return eps_max_; }
  std::optional<double> clip_radius() const { return r_s_; }
  double noise_std() const { return noise_std_; }
  const SmoothedGmm& smoothed() const { return smoothed_; }
  int dim() const { return smoothed_.dim(); }

  /// S(x, sigma). Throws std::invalid_argument for sigma < 0.
  Vec eval(const Vec& x, double sigma, RngStream& rng) const;
  void eval_into(const Vec& x, double sigma, RngStream& rng, Vec& out) const;

  nlohmann::json to_json() const;
  static ScoreModel from_json(const nlohmann::json& j);

 private:
  Kind kind_;
  SmoothedGmm smoothed_;
  double eps_max_ = 0.0;
  double noise_std_ = 0.0;
  std::optional<double> r_s_;
};

/// MMSE denoiser of the mixture under noise level sigma (sigma > 0).
Vec mmse_denoise(const GaussianMixture& gmm, const Vec& x, double sigma);

/// Exact-signature spelling of the smoothed-score operation.
inline Vec smoothed_score(const ScoreModel& model, const Vec& x, double sigma,
                          RngStream& rng) {
  return model.eval(x, sigma, rng);
}

}  // namespace pmc

#endif  // PMC_SCORE_MODEL_HPP
