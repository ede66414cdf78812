// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_CLOSURE_LIKELIHOOD_HPP
#define PMC_CLOSURE_LIKELIHOOD_HPP

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmc/likelihood.hpp"
#include "pmc/rng.hpp"

namespace pmc {

/// Array geometry plus the non-redundant closure index sets, shared by every
/// time step. Baselines are ordered pair-major: index(a,b) for a<b, then
/// time-major rows t * n_baselines + index(a,b).
struct ClosureInstrument {
  int n_telescopes = 0;
  int n_times = 0;
  int h = 0, w = 0;                           // image grid
  std::vector<std::array<double, 2>> uv;      // n_times * n_baselines points
  std::vector<std::array<int, 3>> triangles;  // (M-1)(M-2)/2 triples
  std::vector<std::array<int, 4>> quads;      // M(M-3)/2 quadruples

  int n_baselines() const { return n_telescopes * (n_telescopes - 1) / 2; }
  int baseline_index(int a, int b) const;
  void validate() const;
};

/// Synthetic ring array: telescopes on a jittered circle, rotated rigidly by
/// rotation_step radians per time step. max_baseline is in cycles across the
/// unit image field (Nyquist for an h-pixel grid is h/2). Coverage is
/// artifact-defined; real Earth-rotation synthesis is out of scope.
ClosureInstrument ring_instrument(int n_telescopes, int n_times, int h, int w,
                                  double max_baseline, double rotation_step);

/// Independent closure index sets: triangles are all triples containing
/// telescope 0; quads are greedily rank-selected log-closure-amplitude
/// arrangements up to the maximal independent count M(M-3)/2.
std::vector<std::array<int, 3>> closure_triangles(int n_telescopes);
std::vector<std::array<int, 4>> closure_quads(int n_telescopes);

/// Non-linear interferometric likelihood over closure phases, log closure
/// amplitudes and a total-flux constraint:
///   g(x) = chi2_cph + chi2_camp + rho ||sum_i x_i - y_flux||^2 / 2
/// with per-measurement scalar noise levels beta_cph / beta_camp.
/// Closure-phase residuals are wrapped to (-pi, pi] before squaring. The
/// nonuniform DFT is precomputed as an explicit matrix (baselines x pixels).
class ClosureLikelihood final : public Likelihood {
 public:
  ClosureLikelihood(ClosureInstrument instrument, Vec y_cph, Vec y_camp,
                    double y_flux, double beta_cph, double beta_camp,
                    double rho, std::optional<double> r_g = std::nullopt);

  int dim() const override { return instrument_.h * instrument_.w; }
  const ClosureInstrument& instrument() const { return instrument_; }
  const Vec& y_cph() const { return y_cph_; }
  const Vec& y_camp() const { return y_camp_; }
  double y_flux() const { return y_flux_; }
  double beta_cph() const { return beta_cph_; }
  double beta_camp() const { return beta_camp_; }
  double rho() const { return rho_; }
  std::optional<double> clip_radius() const override { return r_g_; }

  struct Forward {
    Vec cph;      // wrapped to (-pi, pi]
    Vec camp;
    double flux;
  };
  /// Visibilities via the nonuniform DFT, then bispectrum angles per triangle
  /// and log amplitude ratios per quad. Throws degenerate_measurement_error
  /// if a participating |V| vanishes.
  Forward forward(const Vec& x) const;

  /// Closure quantities of an externally supplied visibility set (used by the
  /// measurement simulator; same ordering as forward()).
  Forward closures_from_visibilities(const Vec& v_re, const Vec& v_im,
                                     double flux) const;

  /// Clean (uncorrupted) visibilities of an image.
  void visibilities(const Vec& x, Vec& v_re, Vec& v_im) const;

  double value(const Vec& x, LikScratch& scratch) const override;
  void grad_into(const Vec& x, Vec& out, LikScratch& scratch) const override;

  /// Reduced chi^2 statistics (mean squared standardized residual).
  struct Chi2 {
    double cph;
    double camp;
  };
  Chi2 reduced_chi2(const Vec& x) const;

  nlohmann::json to_json() const;
  static ClosureLikelihood from_json(const nlohmann::json& j);

 private:
  ClosureInstrument instrument_;
  Vec y_cph_, y_camp_;
  double y_flux_;
  double beta_cph_, beta_camp_;
  double rho_;
  std::optional<double> r_g_;
  Mat f_re_, f_im_;  // nonuniform DFT, rows = n_times * n_baselines
};

/// Maps an angle to the principal interval (-pi, pi].
double wrap_angle(double a);

/// Corrupts clean visibilities per telescope-based gains g_a = exp(gain_std
/// * z) and phases phi_a = phase_std * z, plus baseline thermal noise with
/// per-quadrature deviation thermal_std, then forms closure data from the
/// corrupted set. y_flux is recorded exactly as sum(truth).
ClosureLikelihood simulate_measurements(const Vec& truth,
                                        const ClosureInstrument& instrument,
                                        double beta_cph, double beta_camp,
                                        double rho, double gain_std,
                                        double phase_std, double thermal_std,
                                        RngStream& rng,
                                        std::optional<double> r_g = std::nullopt);

/// Monte-Carlo estimate of the closure-quantity noise levels induced by
/// thermal visibility noise on a given truth image (gains and phases cancel
/// in closure quantities and do not contribute). Returns (beta_cph,
/// beta_camp) as RMS deviations over measurements and replicas.
std::pair<double, double> estimate_closure_noise(
    const ClosureInstrument& instrument, const Vec& truth, double thermal_std,
    int replicas, RngStream& rng);

inline ClosureLikelihood::Forward bhi_forward(const ClosureLikelihood& lik,
                                              const Vec& x) {
  return lik.forward(x);
}
inline Vec bhi_grad(const ClosureLikelihood& lik, const Vec& x) {
  return lik.grad(x);
}

}  // namespace pmc

#endif  // PMC_CLOSURE_LIKELIHOOD_HPP
