// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_LIKELIHOOD_HPP
#define PMC_LIKELIHOOD_HPP

#include <optional>
#include <stdexcept>

#include "pmc/gaussian_mixture.hpp"

namespace pmc {

/// Thrown when a likelihood evaluation is undefined at the given point, e.g.
/// a closure amplitude whose denominator visibility vanishes. The batch
/// runner treats it like a divergence of the offending chain.
struct degenerate_measurement_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scratch buffers reused across likelihood evaluations so the hot sampling
/// loop stays allocation-free. One instance per calling thread.
struct LikScratch {
  Vec residual;
  Vec aux;
};

/// Negative log-likelihood g(x) = -log l(y | x) with analytic gradient.
///
/// Implementations are immutable after construction and evaluation is pure,
/// so one instance may be shared by concurrently running chains. When a clip
/// radius is configured the gradient is rescaled to norm <= r_g before being
/// returned.
class Likelihood {
 public:
  virtual ~Likelihood() = default;

  virtual int dim() const = 0;
  virtual double value(const Vec& x, LikScratch& scratch) const = 0;
  virtual void grad_into(const Vec& x, Vec& out, LikScratch& scratch) const = 0;

  virtual std::optional<double> clip_radius() const { return std::nullopt; }

  double value(const Vec& x) const {
    LikScratch s;
    return value(x, s);
  }
  Vec grad(const Vec& x) const {
    LikScratch s;
    Vec out(dim());
    grad_into(x, out, s);
    return out;
  }

 protected:
  /// Rescales g to norm <= r_g when clipping is enabled.
  void apply_clip(Vec& g) const {
    if (auto r = clip_radius()) {
      const double norm = g.norm();
      if (norm > *r) g *= *r / norm;
    }
  }
};

}  // namespace pmc

#endif  // PMC_LIKELIHOOD_HPP
