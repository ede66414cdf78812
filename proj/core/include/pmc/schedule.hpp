// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_SCHEDULE_HPP
#define PMC_SCHEDULE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace pmc {

/// Exponential annealing schedule
///   sigma_k = max(sigma0 * xi^k, sigma_min)
///   alpha_k = max(alpha0 * sigma_k^2, 1)
/// so the smoothing decays geometrically to the sigma_min floor while the
/// prior weight rides sigma_k^2 down to one. With sigma_min > 0, alpha0 must
/// satisfy alpha0 <= 1 / sigma_min^2 or alpha_k would never reach 1.
struct AnnealingSchedule {
  double sigma0 = 10.0;
  double xi = 0.975;
  double sigma_min = 0.0;
  double alpha0 = 10.0;

  void validate() const {
    if (!(sigma0 > 0.0)) {
      throw std::invalid_argument("AnnealingSchedule: sigma0 must be > 0");
    }
    if (!(xi > 0.0 && xi < 1.0)) {
      throw std::invalid_argument("AnnealingSchedule: xi must be in (0,1)");
    }
    if (sigma_min < 0.0) {
      throw std::invalid_argument("AnnealingSchedule: sigma_min must be >= 0");
    }
    if (!(alpha0 > 0.0)) {
      throw std::invalid_argument("AnnealingSchedule: alpha0 must be > 0");
    }
    if (sigma_min > 0.0 && alpha0 > 1.0 / (sigma_min * sigma_min) + 1e-12) {
      throw std::invalid_argument(
          "AnnealingSchedule: alpha0 must be <= 1/sigma_min^2");
    }
  }

  /// (sigma_k, alpha_k) at iteration k >= 0.
  std::pair<double, double> at(int k) const {
    const double sigma = std::max(sigma0 * std::pow(xi, k), sigma_min);
    const double alpha = std::max(alpha0 * sigma * sigma, 1.0);
    return {sigma, alpha};
  }
};

inline std::pair<double, double> schedule_at(const AnnealingSchedule& s,
                                             int k) {
  return s.at(k);
}

}  // namespace pmc

#endif  // PMC_SCHEDULE_HPP
