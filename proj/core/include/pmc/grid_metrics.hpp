// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_GRID_METRICS_HPP
#define PMC_GRID_METRICS_HPP

#include <string>
#include <vector>

#include "pmc/gaussian_mixture.hpp"
#include "pmc/likelihood.hpp"

namespace pmc {

/// Uniform 2D quadrature grid (midpoint rule on cell centers).
struct Grid2D {
  double lo_x = -50.0, hi_x = 50.0;
  double lo_y = -50.0, hi_y = 50.0;
  int nx = 1000, ny = 1000;

  void validate() const;
  double dx() const { return (hi_x - lo_x) / nx; }
  double dy() const { return (hi_y - lo_y) / ny; }
  double cell_area() const { return dx() * dy(); }
  double center_x(int i) const { return lo_x + (i + 0.5) * dx(); }
  double center_y(int j) const { return lo_y + (j + 0.5) * dy(); }
};

/// Unnormalized posterior l(y|x) p(x) tabulated on a grid: the grid-normalized
/// log density plus the analytic score field (which needs no normalizer).
/// Tabulate once per posterior and reuse across metric evaluations. lik may
/// be null for a prior-only density.
class PosteriorGrid {
 public:
  PosteriorGrid(const Likelihood* lik, const GaussianMixture& prior,
                const Grid2D& grid);

  const Grid2D& grid() const { return grid_; }
  /// Fraction of unnormalized mass the grid captures relative to a grid of
  /// twice the extent; below 0.999 every metric carries a coverage warning.
  double mass_ratio() const { return mass_ratio_; }

  double log_pi(int cell) const { return log_pi_[cell]; }
  double score_x(int cell) const { return score_x_[cell]; }
  double score_y(int cell) const { return score_y_[cell]; }

 private:
  friend struct GridMetricsEval;
  Grid2D grid_;
  Eigen::ArrayXd log_pi_;
  Eigen::ArrayXd score_x_, score_y_;
  double mass_ratio_ = 1.0;
};

struct GridValue {
  double value = 0.0;
  std::vector<std::string> warnings;
  bool clean() const { return warnings.empty(); }
};

struct GridMetrics {
  GridValue kl;
  GridValue fi;
};

/// KL(nu || pi) and FI(nu || pi) in one pass over the grid:
///   KL = sum nu (log nu - log pi) dA,
///   FI = sum ||grad log nu - grad log pi||^2 nu dA.
/// Warnings flag posterior mass deficits and nu mass captured below 99.9%.
GridMetrics grid_metrics(const GaussianMixture& nu, const PosteriorGrid& post);

GridValue grid_kl(const GaussianMixture& nu, const PosteriorGrid& post);
GridValue grid_fi(const GaussianMixture& nu, const PosteriorGrid& post);

/// Convenience forms that tabulate the posterior on the fly.
GridValue grid_kl(const GaussianMixture& nu, const Likelihood* lik,
                  const GaussianMixture& prior, const Grid2D& grid);
GridValue grid_fi(const GaussianMixture& nu, const Likelihood* lik,
                  const GaussianMixture& prior, const Grid2D& grid);

}  // namespace pmc

#endif  // PMC_GRID_METRICS_HPP
