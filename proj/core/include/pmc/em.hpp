// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_EM_HPP
#define PMC_EM_HPP

#include <vector>

#include "pmc/gaussian_mixture.hpp"
#include "pmc/rng.hpp"

namespace pmc {

struct EmOptions {
  int restarts = 5;
  int max_iters = 200;
  double rel_tol = 1e-9;
};

struct EmResult {
  GaussianMixture mixture;
  /// Log-likelihood per EM iteration, one trace per restart; each trace is
  /// nondecreasing (to floating-point slack).
  std::vector<std::vector<double>> loglik_traces;
  int best_restart = 0;
  double best_loglik = 0.0;
};

/// Maximum-likelihood Gaussian mixture via EM with k-means++ style
/// initialization, best of opts.restarts restarts. samples holds one point
/// per row and must have at least K * (dim + 1) rows.
EmResult em_fit(const Mat& samples, int k, RngStream& rng,
                const EmOptions& opts = {});

inline GaussianMixture em_fit_gmm(const Mat& samples, int k, RngStream& rng,
                                  const EmOptions& opts = {}) {
  return em_fit(samples, k, rng, opts).mixture;
}

}  // namespace pmc

#endif  // PMC_EM_HPP
