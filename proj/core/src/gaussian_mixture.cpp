// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/gaussian_mixture.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kWeightTol = 1e-12;
}  // namespace

void ensure_finite(const Vec& v, const char* context) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(context) +
                                ": non-finite entries");
  }
}

GaussianMixture GaussianMixture::dense(Vec weights, std::vector<Vec> means,
                                       std::vector<Mat> covariances) {
  GaussianMixture g;
  g.kind_ = CovKind::Dense;
  g.weights_ = std::move(weights);
  g.means_ = std::move(means);
  g.covs_ = std::move(covariances);
  g.validate_and_finish();
  return g;
}

GaussianMixture GaussianMixture::isotropic(Vec weights, std::vector<Vec> means,
                                           Vec variances) {
  GaussianMixture g;
  g.kind_ = CovKind::Isotropic;
  g.weights_ = std::move(weights);
  g.means_ = std::move(means);
  g.iso_vars_ = std::move(variances);
  g.validate_and_finish();
  return g;
}

void GaussianMixture::validate_and_finish() {
  const int K = static_cast<int>(weights_.size());
  if (K == 0 || static_cast<int>(means_.size()) != K) {
    throw std::invalid_argument("GaussianMixture: component count mismatch");
  }
  const int n = static_cast<int>(means_.front().size());
  if (n == 0) throw std::invalid_argument("GaussianMixture: empty mean");
  for (const auto& m : means_) {
    if (m.size() != n) {
      throw std::invalid_argument("GaussianMixture: mean dimension mismatch");
    }
    ensure_finite(m, "GaussianMixture mean");
  }
  if (weights_.minCoeff() < 0.0) {
    throw std::invalid_argument("GaussianMixture: negative weight");
  }
  if (std::abs(weights_.sum() - 1.0) > kWeightTol) {
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  }
  log_weights_.resize(K);
  for (int k = 0; k < K; ++k) {
    log_weights_[k] = weights_[k] > 0.0
                          ? std::log(weights_[k])
                          : -std::numeric_limits<double>::infinity();
  }

  if (kind_ == CovKind::Dense) {
    if (static_cast<int>(covs_.size()) != K) {
      throw std::invalid_argument("GaussianMixture: covariance count mismatch");
    }
    llts_.resize(K);
    log_norms_.resize(K);
    for (int k = 0; k < K; ++k) {
      Mat& c = covs_[k];
      if (c.rows() != n || c.cols() != n || !c.allFinite()) {
        throw std::invalid_argument("GaussianMixture: bad covariance shape");
      }
      if ((c - c.transpose()).cwiseAbs().maxCoeff() >
          1e-8 * (1.0 + c.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("GaussianMixture: covariance not symmetric");
      }
      c = 0.5 * (c + c.transpose()).eval();
      llts_[k].compute(c);
      if (llts_[k].info() != Eigen::Success) {
        throw std::invalid_argument(
            "GaussianMixture: covariance not positive definite");
      }
      double logdet = 0.0;
      for (int i = 0; i < n; ++i) {
        logdet += 2.0 * std::log(llts_[k].matrixL()(i, i));
      }
      log_norms_[k] = -0.5 * (n * kLog2Pi + logdet);
    }
  } else {
    if (iso_vars_.size() != K) {
      throw std::invalid_argument("GaussianMixture: variance count mismatch");
    }
    if (!(iso_vars_.minCoeff() > 0.0)) {
      throw std::invalid_argument("GaussianMixture: variances must be > 0");
    }
    log_norms_.resize(K);
    for (int k = 0; k < K; ++k) {
      log_norms_[k] = -0.5 * n * (kLog2Pi + std::log(iso_vars_[k]));
    }
  }
}

Mat GaussianMixture::covariance(int k) const {
  if (kind_ == CovKind::Dense) return covs_[k];
  return iso_vars_[k] * Mat::Identity(dim(), dim());
}

double GaussianMixture::component_logpdf(int k, const Vec& x) const {
  if (kind_ == CovKind::Dense) {
    const Vec d = x - means_[k];
    return log_norms_[k] -
           0.5 * llts_[k].matrixL().solve(d).squaredNorm();
  }
  return log_norms_[k] - 0.5 * (x - means_[k]).squaredNorm() / iso_vars_[k];
}

double GaussianMixture::logpdf(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("gmm_logpdf: dimension mismatch");
  }
  const int K = components();
  double lmax = -std::numeric_limits<double>::infinity();
  Eigen::ArrayXd logs(K);
  for (int k = 0; k < K; ++k) {
    logs[k] = log_weights_[k] + component_logpdf(k, x);
    lmax = std::max(lmax, logs[k]);
  }
  if (!std::isfinite(lmax)) return lmax;
  return lmax + std::log((logs - lmax).exp().sum());
}

Vec GaussianMixture::responsibilities(const Vec& x) const {
  const int K = components();
  Eigen::ArrayXd logs(K);
  double lmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    logs[k] = log_weights_[k] + component_logpdf(k, x);
    lmax = std::max(lmax, logs[k]);
  }
  Eigen::ArrayXd r = (logs - lmax).exp();
  return (r / r.sum()).matrix();
}

void GaussianMixture::score_into(const Vec& x, Vec& out) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("gmm_score: dimension mismatch");
  }
  const Vec r = responsibilities(x);
  out.setZero(dim());
  for (int k = 0; k < components(); ++k) {
    if (r[k] == 0.0) continue;
    if (kind_ == CovKind::Dense) {
      out.noalias() += r[k] * llts_[k].solve(means_[k] - x);
    } else {
      out.noalias() += (r[k] / iso_vars_[k]) * (means_[k] - x);
    }
  }
}

Vec GaussianMixture::score(const Vec& x) const {
  Vec out;
  score_into(x, out);
  return out;
}

Vec GaussianMixture::sample(RngStream& rng) const {
  // Component index by inverse CDF on the weights, then one Gaussian draw.
  const double u = rng.uniform01();
  int k = 0;
  double acc = 0.0;
  for (; k < components() - 1; ++k) {
    acc += weights_[k];
    if (u <= acc) break;
  }
  const int n = dim();
  Vec z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  if (kind_ == CovKind::Dense) {
    return means_[k] + llts_[k].matrixL() * z;
  }
  return means_[k] + std::sqrt(iso_vars_[k]) * z;
}

double GaussianMixture::total_logpdf(const Mat& rows) const {
  double total = 0.0;
  Vec x(dim());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    x = rows.row(i).transpose();
    total += logpdf(x);
  }
  return total;
}

nlohmann::json GaussianMixture::to_json() const {
  nlohmann::json j;
  j["weights"] = std::vector<double>(weights_.begin(), weights_.end());
  nlohmann::json means = nlohmann::json::array();
  for (const auto& m : means_) {
    means.push_back(std::vector<double>(m.begin(), m.end()));
  }
  j["means"] = std::move(means);
  nlohmann::json covs = nlohmann::json::array();
  for (int k = 0; k < components(); ++k) {
    const Mat c = covariance(k);
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < c.rows(); ++i) {
      rows.push_back(std::vector<double>(c.row(i).begin(), c.row(i).end()));
    }
    covs.push_back(std::move(rows));
  }
  j["covariances"] = std::move(covs);
  return j;
}

GaussianMixture GaussianMixture::from_json(const nlohmann::json& j) {
  const auto& jw = j.at("weights");
  const auto& jm = j.at("means");
  const auto& jc = j.at("covariances");
  const int K = static_cast<int>(jw.size());
  if (static_cast<int>(jm.size()) != K || static_cast<int>(jc.size()) != K) {
    throw std::invalid_argument(
        "GaussianMixture JSON: weights/means/covariances length mismatch");
  }
  Vec w(K);
  for (int k = 0; k < K; ++k) w[k] = jw[k].get<double>();
  std::vector<Vec> means(K);
  for (int k = 0; k < K; ++k) {
    const auto v = jm[k].get<std::vector<double>>();
    means[k] = Eigen::Map<const Vec>(v.data(), v.size());
  }
  const int n = static_cast<int>(means.front().size());

  bool all_scalar = true;
  for (int k = 0; k < K; ++k) all_scalar = all_scalar && jc[k].is_number();
  if (all_scalar) {
    Vec vars(K);
    for (int k = 0; k < K; ++k) vars[k] = jc[k].get<double>();
    return isotropic(std::move(w), std::move(means), std::move(vars));
  }

  std::vector<Mat> covs(K);
  for (int k = 0; k < K; ++k) {
    if (jc[k].is_number()) {
      covs[k] = jc[k].get<double>() * Mat::Identity(n, n);
    } else if (jc[k].is_array() && !jc[k].empty() && jc[k][0].is_number()) {
      const auto d = jc[k].get<std::vector<double>>();
      covs[k] = Eigen::Map<const Vec>(d.data(), d.size()).asDiagonal();
    } else {
      const int rows = static_cast<int>(jc[k].size());
      covs[k].resize(rows, rows);
      for (int i = 0; i < rows; ++i) {
        const auto row = jc[k][i].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != rows) {
          throw std::invalid_argument(
              "GaussianMixture JSON: covariance not square");
        }
        covs[k].row(i) = Eigen::Map<const Vec>(row.data(), row.size());
      }
    }
  }
  return dense(std::move(w), std::move(means), std::move(covs));
}

}  // namespace pmc
