// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/closure_likelihood.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

namespace pmc {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

int ClosureInstrument::baseline_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  return a * n_telescopes - a * (a + 1) / 2 + (b - a - 1);
}

void ClosureInstrument::validate() const {
  const int m = n_telescopes;
  if (m < 3) throw std::invalid_argument("ClosureInstrument: need >= 3 telescopes");
  if (n_times < 1) throw std::invalid_argument("ClosureInstrument: need >= 1 time step");
  if (h <= 0 || w <= 0) throw std::invalid_argument("ClosureInstrument: bad grid");
  if (static_cast<int>(uv.size()) != n_times * n_baselines()) {
    throw std::invalid_argument("ClosureInstrument: uv list size mismatch");
  }
  if (static_cast<int>(triangles.size()) != (m - 1) * (m - 2) / 2) {
    throw std::invalid_argument(
        "ClosureInstrument: expected (M-1)(M-2)/2 triangles");
  }
  if (static_cast<int>(quads.size()) != m * (m - 3) / 2) {
    throw std::invalid_argument("ClosureInstrument: expected M(M-3)/2 quads");
  }
  for (const auto& t : triangles) {
    for (int i : t) {
      if (i < 0 || i >= m) throw std::invalid_argument("triangle index range");
    }
  }
  for (const auto& q : quads) {
    for (int i : q) {
      if (i < 0 || i >= m) throw std::invalid_argument("quad index range");
    }
  }
}

std::vector<std::array<int, 3>> closure_triangles(int m) {
  std::vector<std::array<int, 3>> out;
  for (int b = 1; b < m; ++b) {
    for (int c = b + 1; c < m; ++c) out.push_back({0, b, c});
  }
  return out;
}

namespace {

// Signed baseline pattern of the log closure amplitude for arrangement
// (p,q,r,s): +log|V_pq| +log|V_rs| -log|V_pr| -log|V_qs|.
Vec camp_row(int m, const std::array<int, 4>& q) {
  auto idx = [m](int a, int b) {
    if (a > b) std::swap(a, b);
    return a * m - a * (a + 1) / 2 + (b - a - 1);
  };
  Vec row = Vec::Zero(m * (m - 1) / 2);
  row[idx(q[0], q[1])] += 1.0;
  row[idx(q[2], q[3])] += 1.0;
  row[idx(q[0], q[2])] -= 1.0;
  row[idx(q[1], q[3])] -= 1.0;
  return row;
}

// Incremental Gaussian elimination; returns true when the row extends the
// span of the basis collected so far.
bool extends_rank(std::vector<Vec>& basis, std::vector<int>& pivots, Vec row) {
  for (size_t i = 0; i < basis.size(); ++i) {
    const double c = row[pivots[i]];
    if (c != 0.0) row -= c * basis[i];
  }
  int pivot = -1;
  double best = 1e-9;
  for (int j = 0; j < row.size(); ++j) {
    if (std::abs(row[j]) > best) {
      best = std::abs(row[j]);
      pivot = j;
    }
  }
  if (pivot < 0) return false;
  row /= row[pivot];
  basis.push_back(std::move(row));
  pivots.push_back(pivot);
  return true;
}

}  // namespace

std::vector<std::array<int, 4>> closure_quads(int m) {
  const int target = m * (m - 3) / 2;
  std::vector<std::array<int, 4>> out;
  std::vector<Vec> basis;
  std::vector<int> pivots;
  for (int a = 0; a < m && static_cast<int>(out.size()) < target; ++a) {
    for (int b = a + 1; b < m; ++b) {
      for (int c = b + 1; c < m; ++c) {
        for (int d = c + 1; d < m; ++d) {
          // The three arrangements of {a,b,c,d}; their rows sum to zero, so
          // at most two are independent.
          const std::array<std::array<int, 4>, 3> arr = {{
              {a, b, c, d}, {a, c, d, b}, {a, d, b, c}}};
          for (const auto& q : arr) {
            if (static_cast<int>(out.size()) == target) break;
            if (extends_rank(basis, pivots, camp_row(m, q))) out.push_back(q);
          }
        }
      }
    }
  }
  return out;
}

ClosureInstrument ring_instrument(int n_telescopes, int n_times, int h, int w,
                                  double max_baseline, double rotation_step) {
  ClosureInstrument ins;
  ins.n_telescopes = n_telescopes;
  ins.n_times = n_times;
  ins.h = h;
  ins.w = w;
  ins.triangles = closure_triangles(n_telescopes);
  ins.quads = closure_quads(n_telescopes);

  // Jittered ring so baselines are non-redundant.
  const double radius = 0.5 * max_baseline;
  std::vector<std::array<double, 2>> pos(n_telescopes);
  for (int a = 0; a < n_telescopes; ++a) {
    const double theta =
        kTwoPi * a / n_telescopes + 0.35 * std::sin(2.7 * a + 1.0);
    const double r = radius * (0.55 + 0.45 * std::cos(1.9 * a + 0.4) *
                                          std::cos(1.9 * a + 0.4));
    pos[a] = {r * std::cos(theta), r * std::sin(theta)};
  }
  ins.uv.resize(n_times * ins.n_baselines());
  for (int t = 0; t < n_times; ++t) {
    const double rot = t * rotation_step;
    const double cr = std::cos(rot), sr = std::sin(rot);
    int p = 0;
    for (int a = 0; a < n_telescopes; ++a) {
      for (int b = a + 1; b < n_telescopes; ++b, ++p) {
        const double bx = pos[a][0] - pos[b][0];
        const double by = pos[a][1] - pos[b][1];
        ins.uv[t * ins.n_baselines() + p] = {cr * bx - sr * by,
                                             sr * bx + cr * by};
      }
    }
  }
  ins.validate();
  return ins;
}

ClosureLikelihood::ClosureLikelihood(ClosureInstrument instrument, Vec y_cph,
                                     Vec y_camp, double y_flux,
                                     double beta_cph, double beta_camp,
                                     double rho, std::optional<double> r_g)
    : instrument_(std::move(instrument)),
      y_cph_(std::move(y_cph)),
      y_camp_(std::move(y_camp)),
      y_flux_(y_flux),
      beta_cph_(beta_cph),
      beta_camp_(beta_camp),
      rho_(rho),
      r_g_(r_g) {
  instrument_.validate();
  if (!(beta_cph_ > 0.0) || !(beta_camp_ > 0.0)) {
    throw std::invalid_argument("ClosureLikelihood: noise scales must be > 0");
  }
  if (rho_ < 0.0) {
    throw std::invalid_argument("ClosureLikelihood: rho must be >= 0");
  }
  const int t = instrument_.n_times;
  if (y_cph_.size() != t * static_cast<int>(instrument_.triangles.size()) ||
      y_camp_.size() != t * static_cast<int>(instrument_.quads.size())) {
    throw std::invalid_argument("ClosureLikelihood: data size mismatch");
  }
  for (Eigen::Index i = 0; i < y_cph_.size(); ++i) {
    y_cph_[i] = wrap_angle(y_cph_[i]);
  }

  // Nonuniform DFT with pixel (r,c) at ((r-h/2)/h, (c-w/2)/w); a point source
  // at the grid center has constant real visibilities.
  const int h = instrument_.h, w = instrument_.w;
  const int rows = t * instrument_.n_baselines();
  f_re_.resize(rows, h * w);
  f_im_.resize(rows, h * w);
  for (int row = 0; row < rows; ++row) {
    const double u = instrument_.uv[row][0];
    const double v = instrument_.uv[row][1];
    for (int r = 0; r < h; ++r) {
      const double xi = (r - h / 2) / static_cast<double>(h);
      for (int c = 0; c < w; ++c) {
        const double eta = (c - w / 2) / static_cast<double>(w);
        const double phase = -kTwoPi * (u * xi + v * eta);
        f_re_(row, r * w + c) = std::cos(phase);
        f_im_(row, r * w + c) = std::sin(phase);
      }
    }
  }
}

void ClosureLikelihood::visibilities(const Vec& x, Vec& v_re, Vec& v_im) const {
  v_re.noalias() = f_re_ * x;
  v_im.noalias() = f_im_ * x;
}

ClosureLikelihood::Forward ClosureLikelihood::closures_from_visibilities(
    const Vec& v_re, const Vec& v_im, double flux) const {
  const int nb = instrument_.n_baselines();
  const int nt = instrument_.n_times;
  const int ntri = static_cast<int>(instrument_.triangles.size());
  const int nquad = static_cast<int>(instrument_.quads.size());

  Forward out;
  out.cph.resize(nt * ntri);
  out.camp.resize(nt * nquad);
  out.flux = flux;

  for (int t = 0; t < nt; ++t) {
    const int base = t * nb;
    auto re = [&](int a, int b) {
      return v_re[base + instrument_.baseline_index(a, b)];
    };
    auto im = [&](int a, int b) {
      return v_im[base + instrument_.baseline_index(a, b)];
    };
    for (int i = 0; i < ntri; ++i) {
      const auto& tri = instrument_.triangles[i];
      const int a = tri[0], b = tri[1], c = tri[2];
      // Bispectrum V_ab V_bc conj(V_ac); telescope phases cancel.
      const double re1 = re(a, b), im1 = im(a, b);
      const double re2 = re(b, c), im2 = im(b, c);
      const double re3 = re(a, c), im3 = im(a, c);
      const double pr = re1 * re2 - im1 * im2;
      const double pi = re1 * im2 + im1 * re2;
      const double br = pr * re3 + pi * im3;
      const double bi = pi * re3 - pr * im3;
      if (br == 0.0 && bi == 0.0) {
        throw degenerate_measurement_error(
            "closure phase: vanishing bispectrum");
      }
      out.cph[t * ntri + i] = std::atan2(bi, br);
    }
    for (int j = 0; j < nquad; ++j) {
      const auto& q = instrument_.quads[j];
      const double a1 = std::hypot(re(q[0], q[1]), im(q[0], q[1]));
      const double a2 = std::hypot(re(q[2], q[3]), im(q[2], q[3]));
      const double a3 = std::hypot(re(q[0], q[2]), im(q[0], q[2]));
      const double a4 = std::hypot(re(q[1], q[3]), im(q[1], q[3]));
      if (a1 == 0.0 || a2 == 0.0 || a3 == 0.0 || a4 == 0.0) {
        throw degenerate_measurement_error(
            "closure amplitude: vanishing visibility");
      }
      out.camp[t * nquad + j] =
          std::log(a1) + std::log(a2) - std::log(a3) - std::log(a4);
    }
  }
  return out;
}

ClosureLikelihood::Forward ClosureLikelihood::forward(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("bhi_forward: dimension mismatch");
  }
  Vec v_re, v_im;
  visibilities(x, v_re, v_im);
  return closures_from_visibilities(v_re, v_im, x.sum());
}

double ClosureLikelihood::value(const Vec& x, LikScratch&) const {
  const Forward f = forward(x);
  double g = 0.0;
  for (Eigen::Index i = 0; i < f.cph.size(); ++i) {
    const double r = wrap_angle(f.cph[i] - y_cph_[i]);
    g += r * r;
  }
  g /= 2.0 * beta_cph_ * beta_cph_;
  double gc = 0.0;
  for (Eigen::Index j = 0; j < f.camp.size(); ++j) {
    const double r = f.camp[j] - y_camp_[j];
    gc += r * r;
  }
  g += gc / (2.0 * beta_camp_ * beta_camp_);
  const double fr = f.flux - y_flux_;
  g += 0.5 * rho_ * fr * fr;
  return g;
}

void ClosureLikelihood::grad_into(const Vec& x, Vec& out,
                                  LikScratch& scratch) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("bhi_grad: dimension mismatch");
  }
  const int nb = instrument_.n_baselines();
  const int nt = instrument_.n_times;
  const int ntri = static_cast<int>(instrument_.triangles.size());
  const int nquad = static_cast<int>(instrument_.quads.size());
  const int rows = nt * nb;

  Vec& v_re = scratch.residual;
  Vec& v_im = scratch.aux;
  visibilities(x, v_re, v_im);
  const Forward f = closures_from_visibilities(v_re, v_im, x.sum());

  // Per-baseline weights: w_phase from wrapped closure-phase residuals,
  // w_amp from log-closure-amplitude residuals.
  Vec w_phase = Vec::Zero(rows);
  Vec w_amp = Vec::Zero(rows);
  for (int t = 0; t < nt; ++t) {
    const int base = t * nb;
    for (int i = 0; i < ntri; ++i) {
      const auto& tri = instrument_.triangles[i];
      const double r =
          wrap_angle(f.cph[t * ntri + i] - y_cph_[t * ntri + i]) /
          (beta_cph_ * beta_cph_);
      w_phase[base + instrument_.baseline_index(tri[0], tri[1])] += r;
      w_phase[base + instrument_.baseline_index(tri[1], tri[2])] += r;
      w_phase[base + instrument_.baseline_index(tri[0], tri[2])] -= r;
    }
    for (int j = 0; j < nquad; ++j) {
      const auto& q = instrument_.quads[j];
      const double r = (f.camp[t * nquad + j] - y_camp_[t * nquad + j]) /
                       (beta_camp_ * beta_camp_);
      w_amp[base + instrument_.baseline_index(q[0], q[1])] += r;
      w_amp[base + instrument_.baseline_index(q[2], q[3])] += r;
      w_amp[base + instrument_.baseline_index(q[0], q[2])] -= r;
      w_amp[base + instrument_.baseline_index(q[1], q[3])] -= r;
    }
  }

  // d(phase)/dx = Im(conj(V) F) / |V|^2, d(log|V|)/dx = Re(conj(V) F) / |V|^2;
  // fold both into one complex coefficient per baseline:
  // kappa = (w_amp - i w_phase) conj(V) / |V|^2, grad = Re(F^T kappa).
  Vec k_re(rows), k_im(rows);
  for (int row = 0; row < rows; ++row) {
    const double a2 = v_re[row] * v_re[row] + v_im[row] * v_im[row];
    if (a2 == 0.0) {
      k_re[row] = 0.0;
      k_im[row] = 0.0;
      continue;
    }
    k_re[row] = (w_amp[row] * v_re[row] - w_phase[row] * v_im[row]) / a2;
    k_im[row] = (-w_amp[row] * v_im[row] - w_phase[row] * v_re[row]) / a2;
  }
  out.noalias() = f_re_.transpose() * k_re;
  out.noalias() -= f_im_.transpose() * k_im;

  const double fr = rho_ * (f.flux - y_flux_);
  if (fr != 0.0) out.array() += fr;
  apply_clip(out);
}

ClosureLikelihood::Chi2 ClosureLikelihood::reduced_chi2(const Vec& x) const {
  const Forward f = forward(x);
  double cph = 0.0;
  for (Eigen::Index i = 0; i < f.cph.size(); ++i) {
    const double r = wrap_angle(f.cph[i] - y_cph_[i]) / beta_cph_;
    cph += r * r;
  }
  double camp = 0.0;
  for (Eigen::Index j = 0; j < f.camp.size(); ++j) {
    const double r = (f.camp[j] - y_camp_[j]) / beta_camp_;
    camp += r * r;
  }
  return {cph / static_cast<double>(f.cph.size()),
          camp / static_cast<double>(f.camp.size())};
}

ClosureLikelihood simulate_measurements(const Vec& truth,
                                        const ClosureInstrument& instrument,
                                        double beta_cph, double beta_camp,
                                        double rho, double gain_std,
                                        double phase_std, double thermal_std,
                                        RngStream& rng,
                                        std::optional<double> r_g) {
  instrument.validate();
  if (truth.size() != instrument.h * instrument.w) {
    throw std::invalid_argument("simulate_measurements: truth size mismatch");
  }
  // A throwaway likelihood instance supplies the DFT and closure plumbing.
  ClosureLikelihood clean(
      instrument, Vec::Zero(instrument.n_times * instrument.triangles.size()),
      Vec::Zero(instrument.n_times * instrument.quads.size()), 0.0, 1.0, 1.0,
      0.0);
  Vec v_re, v_im;
  clean.visibilities(truth, v_re, v_im);

  // V' = g_a g_b exp(-i(phi_a - phi_b)) V + eta, per Eq.-style corruption
  // with lognormal gains so they stay positive.
  const int m = instrument.n_telescopes;
  const int nb = instrument.n_baselines();
  for (int t = 0; t < instrument.n_times; ++t) {
    std::vector<double> gain(m), phase(m);
    for (int a = 0; a < m; ++a) gain[a] = std::exp(gain_std * rng.normal());
    for (int a = 0; a < m; ++a) phase[a] = phase_std * rng.normal();
    int p = 0;
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b, ++p) {
        const int row = t * nb + p;
        const double g = gain[a] * gain[b];
        const double ang = -(phase[a] - phase[b]);
        const double cre = std::cos(ang), cim = std::sin(ang);
        const double re = g * (cre * v_re[row] - cim * v_im[row]);
        const double im = g * (cre * v_im[row] + cim * v_re[row]);
        v_re[row] = re + thermal_std * rng.normal();
        v_im[row] = im + thermal_std * rng.normal();
      }
    }
  }

  const ClosureLikelihood::Forward data =
      clean.closures_from_visibilities(v_re, v_im, truth.sum());
  return ClosureLikelihood(instrument, data.cph, data.camp, truth.sum(),
                           beta_cph, beta_camp, rho, r_g);
}

std::pair<double, double> estimate_closure_noise(
    const ClosureInstrument& instrument, const Vec& truth, double thermal_std,
    int replicas, RngStream& rng) {
  ClosureLikelihood clean(
      instrument, Vec::Zero(instrument.n_times * instrument.triangles.size()),
      Vec::Zero(instrument.n_times * instrument.quads.size()), 0.0, 1.0, 1.0,
      0.0);
  Vec v_re, v_im;
  clean.visibilities(truth, v_re, v_im);
  const ClosureLikelihood::Forward ref =
      clean.closures_from_visibilities(v_re, v_im, truth.sum());

  double var_cph = 0.0, var_camp = 0.0;
  Vec r_re(v_re.size()), r_im(v_im.size());
  for (int rep = 0; rep < replicas; ++rep) {
    for (Eigen::Index i = 0; i < r_re.size(); ++i) {
      r_re[i] = v_re[i] + thermal_std * rng.normal();
      r_im[i] = v_im[i] + thermal_std * rng.normal();
    }
    const ClosureLikelihood::Forward rep_fwd =
        clean.closures_from_visibilities(r_re, r_im, truth.sum());
    for (Eigen::Index i = 0; i < ref.cph.size(); ++i) {
      const double d = wrap_angle(rep_fwd.cph[i] - ref.cph[i]);
      var_cph += d * d;
    }
    for (Eigen::Index j = 0; j < ref.camp.size(); ++j) {
      const double d = rep_fwd.camp[j] - ref.camp[j];
      var_camp += d * d;
    }
  }
  var_cph /= static_cast<double>(replicas) * ref.cph.size();
  var_camp /= static_cast<double>(replicas) * ref.camp.size();
  return {std::sqrt(var_cph), std::sqrt(var_camp)};
}

nlohmann::json ClosureLikelihood::to_json() const {
  nlohmann::json j;
  j["telescopes"] = instrument_.n_telescopes;
  j["times"] = instrument_.n_times;
  j["h"] = instrument_.h;
  j["w"] = instrument_.w;
  nlohmann::json uv = nlohmann::json::array();
  for (const auto& p : instrument_.uv) uv.push_back({p[0], p[1]});
  j["uv"] = std::move(uv);
  nlohmann::json tris = nlohmann::json::array();
  for (const auto& t : instrument_.triangles) tris.push_back({t[0], t[1], t[2]});
  j["triangles"] = std::move(tris);
  nlohmann::json quads = nlohmann::json::array();
  for (const auto& q : instrument_.quads) {
    quads.push_back({q[0], q[1], q[2], q[3]});
  }
  j["quads"] = std::move(quads);
  j["y_cph"] = std::vector<double>(y_cph_.begin(), y_cph_.end());
  j["y_camp"] = std::vector<double>(y_camp_.begin(), y_camp_.end());
  j["y_flux"] = y_flux_;
  j["beta_cph"] = beta_cph_;
  j["beta_camp"] = beta_camp_;
  j["rho"] = rho_;
  if (r_g_) j["r_g"] = *r_g_;
  return j;
}

ClosureLikelihood ClosureLikelihood::from_json(const nlohmann::json& j) {
  ClosureInstrument ins;
  ins.n_telescopes = j.at("telescopes").get<int>();
  ins.n_times = j.at("times").get<int>();
  ins.h = j.at("h").get<int>();
  ins.w = j.at("w").get<int>();
  for (const auto& p : j.at("uv")) {
    ins.uv.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  for (const auto& t : j.at("triangles")) {
    ins.triangles.push_back(
        {t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
  }
  for (const auto& q : j.at("quads")) {
    ins.quads.push_back(
        {q[0].get<int>(), q[1].get<int>(), q[2].get<int>(), q[3].get<int>()});
  }
  const auto cph = j.at("y_cph").get<std::vector<double>>();
  const auto camp = j.at("y_camp").get<std::vector<double>>();
  std::optional<double> r_g;
  if (j.contains("r_g") && !j["r_g"].is_null()) r_g = j["r_g"].get<double>();
  return ClosureLikelihood(
      std::move(ins), Eigen::Map<const Vec>(cph.data(), cph.size()),
      Eigen::Map<const Vec>(camp.data(), camp.size()),
      j.at("y_flux").get<double>(), j.at("beta_cph").get<double>(),
      j.at("beta_camp").get<double>(), j.at("rho").get<double>(), r_g);
}

}  // namespace pmc
