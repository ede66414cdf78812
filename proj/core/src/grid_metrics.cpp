// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/grid_metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMassThreshold = 0.999;

// Allocation-free 2D mixture evaluator: per-component precision entries are
// unpacked once so the million-cell loops stay scalar.
struct Gmm2 {
  struct Comp {
    double mx, my;
    double p11, p12, p22;  // precision
    double log_norm_w;     // log w_k - log(2 pi) - (1/2) log det Sigma
  };
  std::vector<Comp> comps;

  explicit Gmm2(const GaussianMixture& g) {
    if (g.dim() != 2) {
      throw std::invalid_argument("grid metrics: 2D densities only");
    }
    comps.resize(g.components());
    for (int k = 0; k < g.components(); ++k) {
      const Mat c = g.covariance(k);
      const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
      if (!(det > 0.0)) {
        throw std::invalid_argument("grid metrics: singular covariance");
      }
      auto& cc = comps[k];
      cc.mx = g.mean(k)[0];
      cc.my = g.mean(k)[1];
      cc.p11 = c(1, 1) / det;
      cc.p22 = c(0, 0) / det;
      cc.p12 = -c(0, 1) / det;
      cc.log_norm_w = (g.weights()[k] > 0.0 ? std::log(g.weights()[k])
                                            : -std::numeric_limits<double>::infinity()) -
                      kLog2Pi - 0.5 * std::log(det);
    }
  }

  // log density and score at (x, y); scratch holds per-component logs.
  double logpdf_score(double x, double y, double* logs, double& sx,
                      double& sy) const {
    const int k = static_cast<int>(comps.size());
    double lmax = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const auto& cc = comps[c];
      const double dx = x - cc.mx;
      const double dy = y - cc.my;
      const double quad =
          cc.p11 * dx * dx + 2.0 * cc.p12 * dx * dy + cc.p22 * dy * dy;
      logs[c] = cc.log_norm_w - 0.5 * quad;
      if (logs[c] > lmax) lmax = logs[c];
    }
    double sum = 0.0;
    sx = 0.0;
    sy = 0.0;
    for (int c = 0; c < k; ++c) {
      const double r = std::exp(logs[c] - lmax);
      sum += r;
      const auto& cc = comps[c];
      const double dx = x - cc.mx;
      const double dy = y - cc.my;
      sx -= r * (cc.p11 * dx + cc.p12 * dy);
      sy -= r * (cc.p12 * dx + cc.p22 * dy);
    }
    sx /= sum;
    sy /= sum;
    return lmax + std::log(sum);
  }
};

struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

// log of the unnormalized grid integral of exp(log_f) over a grid.
double log_grid_mass(const Eigen::ArrayXd& log_f, double cell_area) {
  const double lmax = log_f.maxCoeff();
  if (!std::isfinite(lmax)) return lmax;
  Kahan acc;
  for (Eigen::Index i = 0; i < log_f.size(); ++i) {
    acc.add(std::exp(log_f[i] - lmax));
  }
  return lmax + std::log(acc.sum) + std::log(cell_area);
}

}  // namespace

void Grid2D::validate() const {
  if (!(lo_x < hi_x) || !(lo_y < hi_y)) {
    throw std::invalid_argument("Grid2D: bounds must satisfy lo < hi");
  }
  if (nx < 2 || ny < 2) {
    throw std::invalid_argument("Grid2D: need at least 2 cells per axis");
  }
}

PosteriorGrid::PosteriorGrid(const Likelihood* lik,
                             const GaussianMixture& prior, const Grid2D& grid)
    : grid_(grid) {
  grid_.validate();
  if (prior.dim() != 2) {
    throw std::invalid_argument("PosteriorGrid: 2D posteriors only");
  }
  if (lik && lik->dim() != 2) {
    throw std::invalid_argument("PosteriorGrid: likelihood must be 2D");
  }
  const Gmm2 p(prior);
  std::vector<double> logs(prior.components());

  const auto tabulate = [&](const Grid2D& g, Eigen::ArrayXd& log_u,
                            Eigen::ArrayXd* sx_out, Eigen::ArrayXd* sy_out) {
    const int cells = g.nx * g.ny;
    log_u.resize(cells);
    if (sx_out) {
      sx_out->resize(cells);
      sy_out->resize(cells);
    }
    LikScratch scratch;
    Vec xv(2), gv(2);
    for (int j = 0; j < g.ny; ++j) {
      const double y = g.center_y(j);
      for (int i = 0; i < g.nx; ++i) {
        const int cell = j * g.nx + i;
        const double x = g.center_x(i);
        double sx, sy;
        double lp = p.logpdf_score(x, y, logs.data(), sx, sy);
        if (lik) {
          xv[0] = x;
          xv[1] = y;
          lp -= lik->value(xv, scratch);
          if (sx_out) {
            lik->grad_into(xv, gv, scratch);
            sx -= gv[0];
            sy -= gv[1];
          }
        }
        log_u[cell] = lp;
        if (sx_out) {
          (*sx_out)[cell] = sx;
          (*sy_out)[cell] = sy;
        }
      }
    }
  };

  tabulate(grid_, log_pi_, &score_x_, &score_y_);
  const double log_z = log_grid_mass(log_pi_, grid_.cell_area());
  log_pi_ -= log_z;

  // Same cell count over twice the extent: a cheap reference integral to
  // detect mass leaking off the grid.
  Grid2D wide = grid_;
  const double cx = 0.5 * (grid_.lo_x + grid_.hi_x);
  const double cy = 0.5 * (grid_.lo_y + grid_.hi_y);
  wide.lo_x = cx - (cx - grid_.lo_x) * 2.0;
  wide.hi_x = cx + (grid_.hi_x - cx) * 2.0;
  wide.lo_y = cy - (cy - grid_.lo_y) * 2.0;
  wide.hi_y = cy + (grid_.hi_y - cy) * 2.0;
  Eigen::ArrayXd log_wide;
  tabulate(wide, log_wide, nullptr, nullptr);
  const double log_z_wide = log_grid_mass(log_wide, wide.cell_area());
  mass_ratio_ = std::exp(log_z - log_z_wide);
}

GridMetrics grid_metrics(const GaussianMixture& nu, const PosteriorGrid& post) {
  const Gmm2 q(nu);
  std::vector<double> logs(nu.components());
  const Grid2D& g = post.grid();
  const double area = g.cell_area();

  Kahan kl, fi, mass;
  for (int j = 0; j < g.ny; ++j) {
    const double y = g.center_y(j);
    for (int i = 0; i < g.nx; ++i) {
      const int cell = j * g.nx + i;
      double sx, sy;
      const double log_nu = q.logpdf_score(g.center_x(i), y, logs.data(), sx, sy);
      const double nu_val = std::exp(log_nu);
      if (nu_val == 0.0) continue;
      mass.add(nu_val);
      kl.add(nu_val * (log_nu - post.log_pi(cell)));
      const double gx = sx - post.score_x(cell);
      const double gy = sy - post.score_y(cell);
      fi.add(nu_val * (gx * gx + gy * gy));
    }
  }

  GridMetrics out;
  out.kl.value = kl.sum * area;
  out.fi.value = fi.sum * area;
  std::vector<std::string> warnings;
  if (post.mass_ratio() < kMassThreshold) {
    warnings.push_back("posterior grid mass deficit");
  }
  if (mass.sum * area < kMassThreshold) {
    warnings.push_back("nu grid mass deficit");
  }
  out.kl.warnings = warnings;
  out.fi.warnings = std::move(warnings);
  return out;
}

GridValue grid_kl(const GaussianMixture& nu, const PosteriorGrid& post) {
  return grid_metrics(nu, post).kl;
}

GridValue grid_fi(const GaussianMixture& nu, const PosteriorGrid& post) {
  return grid_metrics(nu, post).fi;
}

GridValue grid_kl(const GaussianMixture& nu, const Likelihood* lik,
                  const GaussianMixture& prior, const Grid2D& grid) {
  return grid_kl(nu, PosteriorGrid(lik, prior, grid));
}

GridValue grid_fi(const GaussianMixture& nu, const Likelihood* lik,
                  const GaussianMixture& prior, const Grid2D& grid) {
  return grid_fi(nu, PosteriorGrid(lik, prior, grid));
}

}  // namespace pmc
