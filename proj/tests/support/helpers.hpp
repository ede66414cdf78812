// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_TESTS_SUPPORT_HELPERS_HPP
#define PMC_TESTS_SUPPORT_HELPERS_HPP

#include <functional>
#include <vector>

#include "pmc/likelihood.hpp"
#include "pmc/rng.hpp"

namespace pmc::test {

/// Likelihood defined by plain callables, for hand-value and edge-case tests.
class FnLikelihood final : public Likelihood {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;

  FnLikelihood(int dim, ValueFn value, GradFn grad)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

  int dim() const override { return dim_; }
  double value(const Vec& x, LikScratch&) const override { return value_(x); }
  void grad_into(const Vec& x, Vec& out, LikScratch&) const override {
    out = grad_(x);
  }

 private:
  int dim_;
  ValueFn value_;
  GradFn grad_;
};

inline FnLikelihood zero_likelihood(int dim) {
  return FnLikelihood(
      dim, [](const Vec&) { return 0.0; },
      [dim](const Vec&) { return Vec::Zero(dim); });
}

/// Central finite differences of g with per-coordinate step
/// h_i = scale * (1 + |x_i|).
inline Vec fd_gradient(const Likelihood& lik, const Vec& x,
                       double scale = 1e-5) {
  LikScratch scratch;
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = scale * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = lik.value(xp, scratch);
    xp[i] = x[i] - h;
    const double fm = lik.value(xp, scratch);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central finite differences of a scalar function of a vector.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-5) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Random SPD matrix a a^T + ridge I.
inline Mat random_spd(int n, RngStream& rng, double ridge = 0.3) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  return a * a.transpose() / n + ridge * Mat::Identity(n, n);
}

inline Vec random_vec(int n, RngStream& rng, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace pmc::test

#endif  // PMC_TESTS_SUPPORT_HELPERS_HPP
