// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/sample_stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

PixelStats sample_stats(const Mat& samples, const Vec& truth, double max_ref) {
  const int batch = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (batch < 2) throw std::invalid_argument("sample_stats: need >= 2 samples");
  if (truth.size() != n) {
    throw std::invalid_argument("sample_stats: truth dimension mismatch");
  }
  if (!(max_ref > 0.0)) {
    throw std::invalid_argument("sample_stats: max_ref must be > 0");
  }

  PixelStats out;
  out.mean = samples.colwise().mean().transpose();
  out.sd.resize(n);
  for (int i = 0; i < n; ++i) {
    out.sd[i] = std::sqrt(
        (samples.col(i).array() - out.mean[i]).square().sum() / batch);
  }

  int covered = 0;
  double nll = 0.0;
  bool degenerate = false;
  for (int i = 0; i < n; ++i) {
    const double err = out.mean[i] - truth[i];
    if (std::abs(err) <= 3.0 * out.sd[i]) ++covered;
    if (out.sd[i] == 0.0) {
      if (err != 0.0) degenerate = true;
      continue;  // exact and spreadless coordinate contributes nothing
    }
    const double v = out.sd[i] * out.sd[i];
    nll += 0.5 * err * err / v + 0.5 * (kLog2Pi + std::log(v));
  }
  out.coverage3sd = static_cast<double>(covered) / n;
  out.nll =
      degenerate ? std::numeric_limits<double>::infinity() : nll / n;
  out.mse = (out.mean - truth).squaredNorm() / n;
  out.psnr_db = out.mse > 0.0
                    ? 10.0 * std::log10(max_ref * max_ref / out.mse)
                    : std::numeric_limits<double>::infinity();
  return out;
}

Classification classify_modes(const Mat& samples,
                              const std::vector<Vec>& mode_means) {
  const int batch = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  const int m = static_cast<int>(mode_means.size());
  if (m < 1) throw std::invalid_argument("classify_modes: need >= 1 mode");
  for (const auto& mm : mode_means) {
    if (mm.size() != n) {
      throw std::invalid_argument("classify_modes: mode dimension mismatch");
    }
  }

  Classification out;
  out.assignment.resize(batch);
  for (int i = 0; i < batch; ++i) {
    const Vec x = samples.row(i).transpose();
    const double xnorm = x.norm();
    int best = 0;
    double best_d = (x - mode_means[0]).squaredNorm();
    double best_cos =
        xnorm > 0.0 && mode_means[0].norm() > 0.0
            ? x.dot(mode_means[0]) / (xnorm * mode_means[0].norm())
            : 0.0;
    for (int k = 1; k < m; ++k) {
      const double d = (x - mode_means[k]).squaredNorm();
      if (d > best_d) continue;
      const double cos =
          xnorm > 0.0 && mode_means[k].norm() > 0.0
              ? x.dot(mode_means[k]) / (xnorm * mode_means[k].norm())
              : 0.0;
      // Strictly closer wins; exact ties fall back to angle, then index.
      if (d < best_d || cos > best_cos) {
        best = k;
        best_d = d;
        best_cos = cos;
      }
    }
    out.assignment[i] = best;
  }

  out.modes.resize(m);
  for (int k = 0; k < m; ++k) {
    const Mat rows = mode_rows(samples, out.assignment, k);
    auto& mode = out.modes[k];
    mode.count = static_cast<int>(rows.rows());
    if (mode.count == 0) {
      mode.mean = Vec::Zero(n);
      mode.sd = Vec::Zero(n);
      continue;
    }
    mode.mean = rows.colwise().mean().transpose();
    mode.sd.resize(n);
    for (int i = 0; i < n; ++i) {
      mode.sd[i] = std::sqrt(
          (rows.col(i).array() - mode.mean[i]).square().sum() / mode.count);
    }
  }
  return out;
}

Mat mode_rows(const Mat& samples, const std::vector<int>& assignment,
              int mode) {
  int count = 0;
  for (int a : assignment) count += a == mode ? 1 : 0;
  Mat out(count, samples.cols());
  int r = 0;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
    if (assignment[i] == mode) out.row(r++) = samples.row(i);
  }
  return out;
}

}  // namespace pmc
