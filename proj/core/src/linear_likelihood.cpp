// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/linear_likelihood.hpp"

#include <stdexcept>

namespace pmc {

GaussianLinearLikelihood::GaussianLinearLikelihood(Mat a, Vec y, double beta,
                                                   std::optional<double> r_g)
    : a_(std::move(a)), y_(std::move(y)), beta_(beta), r_g_(r_g) {
  if (!(beta_ > 0.0)) {
    throw std::invalid_argument("GaussianLinearLikelihood: beta must be > 0");
  }
  if (a_.rows() != y_.size()) {
    throw std::invalid_argument(
        "GaussianLinearLikelihood: A rows and y length differ");
  }
  if (r_g_ && !(*r_g_ > 0.0)) {
    throw std::invalid_argument("GaussianLinearLikelihood: r_g must be > 0");
  }
}

double GaussianLinearLikelihood::value(const Vec& x,
                                       LikScratch& scratch) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("linear value: dimension mismatch");
  }
  scratch.residual.noalias() = a_ * x;
  scratch.residual -= y_;
  return 0.5 * scratch.residual.squaredNorm() / (beta_ * beta_);
}

void GaussianLinearLikelihood::grad_into(const Vec& x, Vec& out,
                                         LikScratch& scratch) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("linear_grad: dimension mismatch");
  }
  scratch.residual.noalias() = a_ * x;
  scratch.residual -= y_;
  out.noalias() = a_.transpose() * scratch.residual;
  out /= beta_ * beta_;
  apply_clip(out);
}

}  // namespace pmc
