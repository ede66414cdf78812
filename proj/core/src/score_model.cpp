// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/score_model.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

SmoothedGmm::SmoothedGmm(GaussianMixture base) : base_(std::move(base)) {
  if (base_.cov_kind() == GaussianMixture::CovKind::Dense) {
    spectral_.resize(base_.components());
    for (int k = 0; k < base_.components(); ++k) {
      Eigen::SelfAdjointEigenSolver<Mat> es(base_.covariance(k));
      if (es.info() != Eigen::Success) {
        throw std::invalid_argument("SmoothedGmm: eigendecomposition failed");
      }
      spectral_[k].q = es.eigenvectors();
      spectral_[k].lambda = es.eigenvalues();
    }
  }
}

double SmoothedGmm::component_logpdf(int k, const Vec& x, double sigma,
                                     Vec& u) const {
  const double s2 = sigma * sigma;
  const int n = dim();
  if (base_.cov_kind() == GaussianMixture::CovKind::Isotropic) {
    const double v = base_.iso_variance(k) + s2;
    u = x - base_.mean(k);
    return -0.5 * (n * (kLog2Pi + std::log(v)) + u.squaredNorm() / v);
  }
  const auto& sp = spectral_[k];
  u.noalias() = sp.q.transpose() * (x - base_.mean(k));
  double logdet = 0.0;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sp.lambda[i] + s2;
    logdet += std::log(v);
    quad += u[i] * u[i] / v;
  }
  return -0.5 * (n * kLog2Pi + logdet + quad);
}

double SmoothedGmm::logpdf(const Vec& x, double sigma) const {
  if (sigma < 0.0) throw std::invalid_argument("SmoothedGmm: sigma < 0");
  if (sigma == 0.0) return base_.logpdf(x);
  const int K = base_.components();
  Eigen::ArrayXd logs(K);
  Vec u;
  double lmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    logs[k] = base_.log_weight(k) + component_logpdf(k, x, sigma, u);
    lmax = std::max(lmax, logs[k]);
  }
  if (!std::isfinite(lmax)) return lmax;
  return lmax + std::log((logs - lmax).exp().sum());
}

void SmoothedGmm::score_into(const Vec& x, double sigma, Vec& out) const {
  if (sigma < 0.0) throw std::invalid_argument("SmoothedGmm: sigma < 0");
  if (x.size() != dim()) {
    throw std::invalid_argument("SmoothedGmm: dimension mismatch");
  }
  if (sigma == 0.0) {
    base_.score_into(x, out);
    return;
  }
  const double s2 = sigma * sigma;
  const int K = base_.components();
  const int n = dim();

  Eigen::ArrayXd logs(K);
  std::vector<Vec> whitened(K);
  double lmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    logs[k] = base_.log_weight(k) + component_logpdf(k, x, sigma, whitened[k]);
    lmax = std::max(lmax, logs[k]);
  }
  Eigen::ArrayXd r = (logs - lmax).exp();
  r /= r.sum();

  out.setZero(n);
  Vec tmp(n);
  for (int k = 0; k < K; ++k) {
    if (r[k] == 0.0) continue;
    if (base_.cov_kind() == GaussianMixture::CovKind::Isotropic) {
      const double v = base_.iso_variance(k) + s2;
      out.noalias() -= (r[k] / v) * whitened[k];
    } else {
      const auto& sp = spectral_[k];
      tmp = whitened[k].cwiseQuotient(
          (sp.lambda.array() + s2).matrix());
      out.noalias() -= r[k] * (sp.q * tmp);
    }
  }
}

Vec SmoothedGmm::score(const Vec& x, double sigma) const {
  Vec out;
  score_into(x, sigma, out);
  return out;
}

Vec SmoothedGmm::denoise(const Vec& x, double sigma) const {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("mmse_denoise: sigma must be > 0");
  }
  if (x.size() != dim()) {
    throw std::invalid_argument("mmse_denoise: dimension mismatch");
  }
  const double s2 = sigma * sigma;
  const int K = base_.components();
  const int n = dim();

  Eigen::ArrayXd logs(K);
  std::vector<Vec> whitened(K);
  double lmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    logs[k] = base_.log_weight(k) + component_logpdf(k, x, sigma, whitened[k]);
    lmax = std::max(lmax, logs[k]);
  }
  Eigen::ArrayXd r = (logs - lmax).exp();
  r /= r.sum();

  // E[z|x] = sum_k r_k ( m_k + Sigma_k (Sigma_k + s2 I)^-1 (x - m_k) ).
  Vec out = Vec::Zero(n);
  Vec tmp(n);
  for (int k = 0; k < K; ++k) {
    if (r[k] == 0.0) continue;
    if (base_.cov_kind() == GaussianMixture::CovKind::Isotropic) {
      const double v = base_.iso_variance(k);
      out.noalias() +=
          r[k] * (base_.mean(k) + (v / (v + s2)) * whitened[k]);
    } else {
      const auto& sp = spectral_[k];
      tmp = whitened[k].cwiseProduct(
          (sp.lambda.array() / (sp.lambda.array() + s2)).matrix());
      out.noalias() += r[k] * (base_.mean(k) + sp.q * tmp);
    }
  }
  return out;
}

ScoreModel::ScoreModel(Kind kind, GaussianMixture base, double eps_max,
                       std::optional<double> r_s,
                       std::optional<double> noise_std)
    : kind_(kind), smoothed_(std::move(base)), eps_max_(eps_max), r_s_(r_s) {
  if (eps_max_ < 0.0) {
    throw std::invalid_argument("ScoreModel: eps_max must be >= 0");
  }
  if (r_s_ && !(*r_s_ > 0.0)) {
    throw std::invalid_argument("ScoreModel: r_s must be > 0");
  }
  if (noise_std) {
    if (*noise_std < 0.0) {
      throw std::invalid_argument("ScoreModel: noise_std must be >= 0");
    }
    noise_std_ = *noise_std;
  } else {
    noise_std_ = eps_max_ / std::sqrt(static_cast<double>(smoothed_.dim()));
  }
}

ScoreModel ScoreModel::exact(GaussianMixture base, std::optional<double> r_s) {
  return ScoreModel(Kind::ExactGmm, std::move(base), 0.0, r_s);
}

ScoreModel ScoreModel::noisy(GaussianMixture base, double eps_max,
                             std::optional<double> r_s,
                             std::optional<double> noise_std) {
  return ScoreModel(Kind::NoisyGmm, std::move(base), eps_max, r_s, noise_std);
}

void ScoreModel::eval_into(const Vec& x, double sigma, RngStream& rng,
                           Vec& out) const {
  if (sigma < 0.0) throw std::invalid_argument("ScoreModel: sigma < 0");
  smoothed_.score_into(x, sigma, out);
  if (kind_ == Kind::NoisyGmm && eps_max_ > 0.0) {
    // AWGN perturbation, rescaled only when its norm exceeds eps_max; the
    // error stays bounded while typical draws keep their Gaussian shape.
    const int n = smoothed_.dim();
    Vec noise(n);
    for (int i = 0; i < n; ++i) noise[i] = noise_std_ * rng.normal();
    const double norm = noise.norm();
    if (norm > eps_max_) noise *= eps_max_ / norm;
    out += noise;
  }
  if (r_s_) {
    const double norm = out.norm();
    if (norm > *r_s_) out *= *r_s_ / norm;
  }
}

Vec ScoreModel::eval(const Vec& x, double sigma, RngStream& rng) const {
  Vec out;
  eval_into(x, sigma, rng, out);
  return out;
}

Vec mmse_denoise(const GaussianMixture& gmm, const Vec& x, double sigma) {
  return SmoothedGmm(gmm).denoise(x, sigma);
}

nlohmann::json ScoreModel::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_ == Kind::ExactGmm ? "exact_gmm" : "noisy_gmm";
  j["gmm"] = smoothed_.base().to_json();
  j["eps_max"] = eps_max_;
  if (r_s_) j["r_s"] = *r_s_;
  j["noise_std"] = noise_std_;
  return j;
}

ScoreModel ScoreModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  GaussianMixture base = GaussianMixture::from_json(j.at("gmm"));
  std::optional<double> r_s;
  if (j.contains("r_s") && !j["r_s"].is_null()) r_s = j["r_s"].get<double>();
  std::optional<double> noise_std;
  if (j.contains("noise_std") && !j["noise_std"].is_null()) {
    noise_std = j["noise_std"].get<double>();
  }
  const double eps = j.value("eps_max", 0.0);
  if (kind == "exact_gmm") {
    return ScoreModel(Kind::ExactGmm, std::move(base), 0.0, r_s);
  }
  if (kind == "noisy_gmm") {
    return ScoreModel(Kind::NoisyGmm, std::move(base), eps, r_s, noise_std);
  }
  throw std::invalid_argument("ScoreModel JSON: unknown kind '" + kind + "'");
}

}  // namespace pmc
