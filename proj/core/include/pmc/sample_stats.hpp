// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_SAMPLE_STATS_HPP
#define PMC_SAMPLE_STATS_HPP

#include <vector>

#include "pmc/gaussian_mixture.hpp"

namespace pmc {

/// Per-pixel summary of a sample batch against a ground truth:
///   NLL = (1/n) sum_i [ (mean_i - x_i)^2 / (2 SD_i^2) + log(2 pi SD_i^2)/2 ]
///   MSE = ||mean - x||^2 / n, PSNR = 10 log10(max_ref^2 / MSE)
///   coverage3sd = fraction of i with |mean_i - x_i| <= 3 SD_i.
/// SD uses the population (1/batch) convention. A coordinate with SD_i = 0
/// and a nonzero error flags NLL as +infinity instead of crashing.
struct PixelStats {
  Vec mean;
  Vec sd;
  double coverage3sd = 0.0;
  double nll = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;
};

/// samples holds one chain per row; needs at least two rows.
PixelStats sample_stats(const Mat& samples, const Vec& truth, double max_ref);

struct ModeSummary {
  int count = 0;
  Vec mean;
  Vec sd;  // population convention
};

struct Classification {
  std::vector<int> assignment;  // one mode index per sample row
  std::vector<ModeSummary> modes;
};

/// Assigns each sample to the nearest mode mean (Euclidean); exact distance
/// ties go to the mode with larger cosine similarity to the sample, then to
/// the lower index.
Classification classify_modes(const Mat& samples,
                              const std::vector<Vec>& mode_means);

/// Rows of samples assigned to the given mode.
Mat mode_rows(const Mat& samples, const std::vector<int>& assignment,
              int mode);

}  // namespace pmc

#endif  // PMC_SAMPLE_STATS_HPP
