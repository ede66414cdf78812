// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/fourier_likelihood.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pmc {

MaskedFourierLikelihood::MaskedFourierLikelihood(std::vector<bool> mask, Vec y,
                                                 double beta, int h, int w,
                                                 std::optional<double> r_g)
    : mask_(std::move(mask)),
      y_(std::move(y)),
      beta_(beta),
      h_(h),
      w_(w),
      r_g_(r_g) {
  if (h_ <= 0 || w_ <= 0) {
    throw std::invalid_argument("MaskedFourierLikelihood: bad grid shape");
  }
  if (static_cast<int>(mask_.size()) != h_ * w_) {
    throw std::invalid_argument(
        "MaskedFourierLikelihood: mask length != h*w");
  }
  if (!(beta_ > 0.0)) {
    throw std::invalid_argument("MaskedFourierLikelihood: beta must be > 0");
  }
  kept_ = 0;
  for (bool b : mask_) kept_ += b ? 1 : 0;
  if (y_.size() != 2 * kept_) {
    throw std::invalid_argument(
        "MaskedFourierLikelihood: y length != 2 * kept frequencies");
  }

  // Row pair (2r, 2r+1) of the operator holds Re and Im of the DFT row for
  // the r-th kept frequency: X(u,v) = sum_{a,b} x[a,b] e^{-2pi i(ua/h+vb/w)}.
  const int n = h_ * w_;
  op_.resize(2 * kept_, n);
  int r = 0;
  for (int u = 0; u < h_; ++u) {
    for (int v = 0; v < w_; ++v) {
      if (!mask_[u * w_ + v]) continue;
      for (int a = 0; a < h_; ++a) {
        for (int b = 0; b < w_; ++b) {
          const double phase =
              -2.0 * std::numbers::pi *
              (static_cast<double>(u) * a / h_ + static_cast<double>(v) * b / w_);
          op_(2 * r, a * w_ + b) = std::cos(phase);
          op_(2 * r + 1, a * w_ + b) = std::sin(phase);
        }
      }
      ++r;
    }
  }
}

Vec MaskedFourierLikelihood::forward(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("fourier forward: dimension mismatch");
  }
  return op_ * x;
}

double MaskedFourierLikelihood::value(const Vec& x, LikScratch& scratch) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("fourier value: dimension mismatch");
  }
  if (kept_ == 0) return 0.0;
  scratch.residual.noalias() = op_ * x;
  scratch.residual -= y_;
  return 0.5 * scratch.residual.squaredNorm() / (beta_ * beta_);
}

void MaskedFourierLikelihood::grad_into(const Vec& x, Vec& out,
                                        LikScratch& scratch) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("fourier_grad: dimension mismatch");
  }
  if (kept_ == 0) {
    out.setZero(dim());
    return;
  }
  scratch.residual.noalias() = op_ * x;
  scratch.residual -= y_;
  out.noalias() = op_.transpose() * scratch.residual;
  out /= beta_ * beta_;
  apply_clip(out);
}

}  // namespace pmc
