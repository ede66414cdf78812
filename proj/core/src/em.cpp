// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/em.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

struct Params {
  Vec w;
  std::vector<Vec> means;
  std::vector<Mat> covs;
};

// k-means++ seeding: first center uniform, later centers proportional to
// squared distance from the nearest chosen one.
std::vector<int> kmeanspp_centers(const Mat& x, int k, RngStream& rng) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.uniform01() * n) % n);
  Vec d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform01() * n) % n;
    } else {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin(
        (x.rowwise() - x.row(pick)).rowwise().squaredNorm().eval());
  }
  return centers;
}

Params init_params(const Mat& x, int k, double cov_floor, RngStream& rng) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const auto centers = kmeanspp_centers(x, k, rng);

  // Hard assignment to the nearest center, then per-cluster moments.
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double dist = (x.row(i) - x.row(centers[c])).squaredNorm();
      if (dist < best) {
        best = dist;
        assign[i] = c;
      }
    }
  }

  const Vec global_mean = x.colwise().mean().transpose();
  Mat centered = x.rowwise() - global_mean.transpose();
  const Mat global_cov =
      centered.transpose() * centered / static_cast<double>(n) +
      cov_floor * Mat::Identity(d, d);

  Params p;
  p.w = Vec::Zero(k);
  p.means.assign(k, Vec::Zero(d));
  p.covs.assign(k, Mat::Zero(d, d));
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    counts[assign[i]]++;
    p.means[assign[i]] += x.row(i).transpose();
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      // Empty cluster: reseed on a random point with the global covariance.
      const int pick = static_cast<int>(rng.uniform01() * n) % n;
      p.means[c] = x.row(pick).transpose();
      p.covs[c] = global_cov;
      p.w[c] = 1.0;
      continue;
    }
    p.means[c] /= counts[c];
    p.w[c] = counts[c];
  }
  for (int i = 0; i < n; ++i) {
    const Vec diff = x.row(i).transpose() - p.means[assign[i]];
    p.covs[assign[i]] += diff * diff.transpose();
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      p.covs[c] = p.covs[c] / counts[c] + cov_floor * Mat::Identity(d, d);
    }
  }
  p.w /= p.w.sum();
  return p;
}

}  // namespace

EmResult em_fit(const Mat& x, int k, RngStream& rng, const EmOptions& opts) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (k < 1) throw std::invalid_argument("em_fit: k must be >= 1");
  if (n < k * (d + 1)) {
    throw std::invalid_argument("em_fit: too few samples for requested k");
  }
  if (!x.allFinite()) {
    throw std::invalid_argument("em_fit: non-finite samples");
  }

  // Covariance floor tied to the data scale; keeps degenerate clusters from
  // collapsing the Cholesky while staying far below fit precision.
  const Vec gmean = x.colwise().mean().transpose();
  const double data_var =
      (x.rowwise() - gmean.transpose()).squaredNorm() / (n * d);
  const double cov_floor = std::max(1e-12, 1e-10 * data_var);

  std::vector<std::vector<double>> traces;
  std::optional<GaussianMixture> best;
  int best_restart = 0;
  double best_loglik = -std::numeric_limits<double>::infinity();
  Mat log_resp(n, k);

  for (int restart = 0; restart < opts.restarts; ++restart) {
    Params p = init_params(x, k, cov_floor, rng);
    std::vector<double> trace;
    double prev_ll = -std::numeric_limits<double>::infinity();
    GaussianMixture current = GaussianMixture::dense(p.w, p.means, p.covs);

    for (int iter = 0; iter < opts.max_iters; ++iter) {
      // E-step: log responsibilities and the current log-likelihood.
      double ll = 0.0;
      for (int i = 0; i < n; ++i) {
        const Vec xi = x.row(i).transpose();
        double lmax = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          log_resp(i, c) =
              std::log(p.w[c]) + current.component_logpdf(c, xi);
          lmax = std::max(lmax, log_resp(i, c));
        }
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += std::exp(log_resp(i, c) - lmax);
        const double lse = lmax + std::log(sum);
        ll += lse;
        for (int c = 0; c < k; ++c) {
          log_resp(i, c) = std::exp(log_resp(i, c) - lse);
        }
      }
      trace.push_back(ll);
      if (iter > 0 && ll - prev_ll <= opts.rel_tol * (1.0 + std::abs(ll))) {
        break;
      }
      prev_ll = ll;

      // M-step.
      for (int c = 0; c < k; ++c) {
        const double nk = log_resp.col(c).sum();
        if (nk < 1e-10) {
          const int pick = static_cast<int>(rng.uniform01() * n) % n;
          p.means[c] = x.row(pick).transpose();
          p.covs[c] = Mat::Identity(d, d) * std::max(data_var, cov_floor);
          p.w[c] = 1.0 / n;
          continue;
        }
        p.w[c] = nk / n;
        p.means[c] = (log_resp.col(c).transpose() * x).transpose() / nk;
        Mat cov = Mat::Zero(d, d);
        for (int i = 0; i < n; ++i) {
          const Vec diff = x.row(i).transpose() - p.means[c];
          cov.noalias() += log_resp(i, c) * (diff * diff.transpose());
        }
        p.covs[c] = cov / nk + cov_floor * Mat::Identity(d, d);
      }
      p.w /= p.w.sum();
      current = GaussianMixture::dense(p.w, p.means, p.covs);
    }

    const double final_ll = trace.back();
    traces.push_back(std::move(trace));
    if (final_ll > best_loglik) {
      best_loglik = final_ll;
      best_restart = restart;
      best = std::move(current);
    }
  }
  return EmResult{std::move(*best), std::move(traces), best_restart,
                  best_loglik};
}

}  // namespace pmc
