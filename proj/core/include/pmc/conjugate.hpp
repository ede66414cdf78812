// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_CONJUGATE_HPP
#define PMC_CONJUGATE_HPP

#include "pmc/gaussian_mixture.hpp"
#include "pmc/linear_likelihood.hpp"

namespace pmc {

/// Closed-form posterior of a Gaussian-mixture prior under a linear Gaussian
/// likelihood. Component-wise conjugate update
///   Sigma'_k = (Sigma_k^-1 + A^T A / beta^2)^-1
///   m'_k     = Sigma'_k (Sigma_k^-1 m_k + A^T y / beta^2)
/// with weights reweighted by each component's marginal evidence
/// N(y; A m_k, beta^2 I + A Sigma_k A^T) and renormalized.
GaussianMixture conjugate_posterior(const GaussianMixture& prior,
                                    const GaussianLinearLikelihood& lik);

}  // namespace pmc

#endif  // PMC_CONJUGATE_HPP
