// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

#include "pmc/closure_likelihood.hpp"
#include "pmc/conjugate.hpp"
#include "pmc/em.hpp"
#include "pmc/fourier_likelihood.hpp"
#include "pmc/io.hpp"
#include "pmc/linear_likelihood.hpp"
#include "pmc/sample_stats.hpp"

namespace pmc {

namespace {

using nlohmann::json;

// Stream-id namespaces hanging off the master seed. Chain streams use the
// plain chain index, so these start far above any realistic batch size.
constexpr std::uint64_t kDataStream = 1ULL << 40;
constexpr std::uint64_t kRealizationStream = 1ULL << 41;
constexpr std::uint64_t kEmStream = 1ULL << 42;
constexpr std::uint64_t kTruthStream = 1ULL << 43;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw config_error(path + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + "." + key, "missing");
  return j[key];
}

double need_num(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double opt_num(const json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<double>();
}

int opt_int(const json& j, const char* key, int fallback) {
  return static_cast<int>(opt_num(j, key, fallback));
}

json problem_defaults(const std::string& kind) {
  if (kind == "validate2d") {
    return {{"mode", {2.0, 2.0}},      {"mode_variance", 1.44},
            {"measurements", 2},       {"a_scale", 0.1},
            {"beta", 1.0},             {"truth", {0.0, 0.0}},
            {"realization", 0}};
  }
  if (kind == "gaussian_image") {
    return {{"dim", 1024},        {"measurements", 307},
            {"beta2", 0.01},      {"mode_shift", 2.0},
            {"base_level", 0.5},  {"prior_variance", 1.0},
            {"noise_scale", 0.0}};
  }
  if (kind == "cs") {
    return {{"dim", 64},          {"measurements", 20},
            {"beta", 0.1},        {"a_scale", 0.0},
            {"prior_shift", 1.0}, {"prior_base", 0.0},
            {"prior_variance", 1.0}, {"truth", nullptr}};
  }
  if (kind == "mri_fourier") {
    return {{"h", 8},           {"w", 8},
            {"keep_fraction", 0.25}, {"beta", 0.05},
            {"prior_shift", 1.0}, {"prior_base", 0.0},
            {"prior_variance", 1.0}, {"truth", nullptr}};
  }
  if (kind == "bhi") {
    return {{"h", 16},           {"w", 16},
            {"telescopes", 9},   {"times", 4},
            {"max_baseline", 4.0}, {"rotation_step", 0.125},
            {"rho", 0.5},        {"gain_std", 0.1},
            {"phase_std", 0.5},  {"thermal_frac", 0.010},
            {"noise_replicas", 200}, {"prior_variance", 0.008},
            {"mode_blur", 0.25}, {"mode_shift", {5, -5}},
            {"r_g", nullptr}};
  }
  fail("experiment", "unknown kind '" + kind + "'");
}

Vec const_vec(int n, double v) { return Vec::Constant(n, v); }

GaussianMixture two_mode_iso(int n, double base, double shift, double var) {
  Vec w(2);
  w << 0.5, 0.5;
  std::vector<Vec> means = {const_vec(n, base - shift),
                            const_vec(n, base + shift)};
  Vec vars(2);
  vars << var, var;
  return GaussianMixture::isotropic(std::move(w), std::move(means),
                                    std::move(vars));
}

// ------------------------------------------------------------------
// Image helpers for the bhi experiment.

Vec blob_image(int h, int w) {
  // Compact asymmetric cluster kept away from the edges so integer shifts of
  // the support never wrap. Both blobs share one width: their visibility
  // amplitude ratio then stays below one at every spatial frequency, so the
  // truth has no interference nulls and closure amplitudes stay well
  // conditioned across the whole coverage.
  Vec img = Vec::Zero(h * w);
  const auto add_blob = [&](double cr, double cc, double amp, double s) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        img[r * w + c] += amp * std::exp(-0.5 * d2 / (s * s));
      }
    }
  };
  add_blob(0.30 * h, 0.68 * w, 1.0, h / 12.0);
  add_blob(0.40 * h, 0.58 * w, 0.42, h / 12.0);
  for (int i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  return img;
}

Vec shift_image(const Vec& img, int h, int w, int dr, int dc) {
  Vec out = Vec::Zero(h * w);
  for (int r = 0; r < h; ++r) {
    const int r2 = r + dr;
    if (r2 < 0 || r2 >= h) continue;
    for (int c = 0; c < w; ++c) {
      const int c2 = c + dc;
      if (c2 < 0 || c2 >= w) continue;
      out[r2 * w + c2] = img[r * w + c];
    }
  }
  return out;
}

Vec blur_image(const Vec& img, int h, int w, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Vec kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  kernel /= kernel.sum();
  Vec tmp = Vec::Zero(h * w), out = Vec::Zero(h * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int cc = std::clamp(c + i, 0, w - 1);
        acc += kernel[i + radius] * img[r * w + cc];
      }
      tmp[r * w + c] = acc;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int rr = std::clamp(r + i, 0, h - 1);
        acc += kernel[i + radius] * tmp[rr * w + c];
      }
      out[r * w + c] = acc;
    }
  }
  return out;
}

// ------------------------------------------------------------------

Mat gaussian_matrix(int rows, int cols, double scale, RngStream& rng) {
  Mat a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = scale * rng.normal();
  }
  return a;
}

Vec add_noise(Vec v, double std, RngStream& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += std * rng.normal();
  return v;
}

double psnr_max_ref(const Vec& truth) {
  double mr = truth.maxCoeff();
  if (!(mr > 0.0)) mr = truth.cwiseAbs().maxCoeff();
  return mr > 0.0 ? mr : 1.0;
}

json pixel_stats_json(const PixelStats& s) {
  return {{"mse", s.mse},
          {"psnr_db", s.psnr_db},
          {"nll", s.nll},
          {"coverage3sd", s.coverage3sd},
          {"mean_sd", s.sd.mean()}};
}

// Null (plus a warning hook) when too few chains survived to form statistics.
json safe_pixel_stats(const Mat& alive, const Vec& truth, double max_ref) {
  if (alive.rows() < 2) return nullptr;
  return pixel_stats_json(sample_stats(alive, truth, max_ref));
}

// 2D test posterior: fixed prior, A and measurement noise drawn from the
// realization stream.
struct Posterior2D {
  GaussianMixture prior;
  GaussianLinearLikelihood lik;
};

Posterior2D build_2d_posterior(const json& prob, std::uint64_t seed,
                               int realization) {
  const auto mode = prob.at("mode").get<std::vector<double>>();
  if (mode.size() != 2) fail("problem.mode", "expected 2 entries");
  const double var = prob.at("mode_variance").get<double>();
  Vec m(2);
  m << mode[0], mode[1];
  Vec w(2);
  w << 0.5, 0.5;
  Vec vars(2);
  vars << var, var;
  std::vector<Vec> means = {-m, m};
  GaussianMixture prior =
      GaussianMixture::isotropic(std::move(w), std::move(means), std::move(vars));

  const int mrows = prob.at("measurements").get<int>();
  const double a_scale = prob.at("a_scale").get<double>();
  const double beta = prob.at("beta").get<double>();
  const auto truth = prob.at("truth").get<std::vector<double>>();
  if (truth.size() != 2) fail("problem.truth", "expected 2 entries");

  RngStream rng(seed, kRealizationStream + static_cast<std::uint64_t>(realization));
  Mat a = gaussian_matrix(mrows, 2, a_scale, rng);
  Vec t(2);
  t << truth[0], truth[1];
  Vec y = add_noise((a * t).eval(), beta, rng);
  return {std::move(prior),
          GaussianLinearLikelihood(std::move(a), std::move(y), beta)};
}

// FI/KL along the trajectory snapshots: fit a mixture to each snapshot's
// live chains and integrate against the tabulated posterior. Rows of chains
// that had already diverged by a snapshot are excluded from the fit.
std::vector<TracePoint> fi_kl_trace(const SampleBatch& batch,
                                    const PosteriorGrid& post,
                                    const DiagnosticsSpec& diag,
                                    std::uint64_t seed,
                                    double* em_max_ll_decrease) {
  std::vector<TracePoint> trace;
  EmOptions em_opts;
  em_opts.restarts = diag.em_restarts;
  for (size_t s = 0; s < batch.snapshots.size(); ++s) {
    const auto& snap = batch.snapshots[s];
    std::vector<int> rows;
    for (int c = 0; c < snap.state.rows(); ++c) rows.push_back(c);
    for (const auto& d : batch.divergences) {
      if (d.iteration < snap.iteration) {
        rows.erase(std::remove(rows.begin(), rows.end(), d.chain), rows.end());
      }
    }
    Mat pts(rows.size(), snap.state.cols());
    for (size_t i = 0; i < rows.size(); ++i) pts.row(i) = snap.state.row(rows[i]);

    TracePoint pt{snap.iteration, 0.0, 0.0, false};
    if (static_cast<int>(rows.size()) <
        diag.em_components * (static_cast<int>(snap.state.cols()) + 1)) {
      pt.fi = std::numeric_limits<double>::infinity();
      pt.kl = std::numeric_limits<double>::infinity();
      pt.warned = true;
      trace.push_back(pt);
      continue;
    }
    RngStream em_rng(seed, kEmStream + static_cast<std::uint64_t>(s));
    try {
      const EmResult fit = em_fit(pts, diag.em_components, em_rng, em_opts);
      if (em_max_ll_decrease) {
        for (const auto& t : fit.loglik_traces) {
          for (size_t i = 1; i < t.size(); ++i) {
            const double drop = (t[i - 1] - t[i]) / (1.0 + std::abs(t[i - 1]));
            *em_max_ll_decrease = std::max(*em_max_ll_decrease, drop);
          }
        }
      }
      const GridMetrics m = grid_metrics(fit.mixture, post);
      pt.fi = m.fi.value;
      pt.kl = m.kl.value;
      pt.warned = !m.fi.clean();
    } catch (const std::exception&) {
      // Pre-convergence snapshots can sit absurdly far from the grid; the
      // fit degenerates there and the evaluation is meaningless. Flag it.
      pt.fi = std::numeric_limits<double>::infinity();
      pt.kl = std::numeric_limits<double>::infinity();
      pt.warned = true;
    }
    trace.push_back(pt);
  }
  return trace;
}

std::pair<double, double> trace_minima(const std::vector<TracePoint>& trace,
                                       bool* all_warned) {
  double fi = std::numeric_limits<double>::infinity();
  double kl = std::numeric_limits<double>::infinity();
  bool any_clean = false;
  for (const auto& p : trace) {
    if (p.warned) continue;
    any_clean = true;
    fi = std::min(fi, p.fi);
    kl = std::min(kl, p.kl);
  }
  if (!any_clean) {
    for (const auto& p : trace) {
      fi = std::min(fi, p.fi);
      kl = std::min(kl, p.kl);
    }
  }
  if (all_warned) *all_warned = !any_clean;
  return {fi, kl};
}

json grid_json(const Grid2D& g) {
  return {{"lo", g.lo_x}, {"hi", g.hi_x}, {"cells", g.nx}};
}

json versions_json() {
  return {{"pmc", "0.1.0"},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"schemas",
           {{"samples_csv", 1}, {"traces_csv", 1}, {"sweep_csv", 1}}},
          {"conventions", {{"sd", "population (1/batch)"}}}};
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  save_sample_batch(cfg.output_dir / "samples.csv",
                    cfg.output_dir / "samples_meta.json", res.batch);
  write_json_file(cfg.output_dir / "stats.json", res.stats);
  if (!res.trace.empty()) {
    std::string text = "iteration,fi,kl\n";
    char buf[96];
    for (const auto& p : res.trace) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.iteration, p.fi,
                    p.kl);
      text += buf;
    }
    std::ofstream out(cfg.output_dir / "traces.csv");
    out << text;
  }
  json meta;
  meta["config"] = cfg.effective;
  meta["config_digest"] = cfg.digest();
  meta["versions"] = versions_json();
  meta["seed"] = cfg.seed;
  json divs = json::array();
  for (const auto& d : res.batch.divergences) {
    divs.push_back({{"chain", d.chain}, {"iteration", d.iteration}});
  }
  meta["divergences"] = std::move(divs);
  meta["wall_seconds"] = res.batch.wall_seconds;
  write_json_file(cfg.output_dir / "meta.json", meta);
}

// ------------------------------------------------------------------
// Per-kind runners.

ExperimentResult run_validate2d(const ExperimentConfig& cfg) {
  const int realization = cfg.problem.at("realization").get<int>();
  Posterior2D post = build_2d_posterior(cfg.problem, cfg.seed, realization);
  const PosteriorGrid grid(&post.lik, post.prior, cfg.diagnostics.grid);

  ChainConfig ch = cfg.chain;
  ch.seed = cfg.seed;
  if (ch.snapshot_every == 0) ch.snapshot_every = cfg.diagnostics.eval_every;
  const ScoreModel score = cfg.score.build(post.prior);

  ExperimentResult res;
  res.batch = run_batch(ch, post.lik, score, cfg.threads);
  double em_drop = 0.0;
  res.trace = fi_kl_trace(res.batch, grid, cfg.diagnostics, cfg.seed, &em_drop);
  bool all_warned = false;
  const auto [min_fi, min_kl] = trace_minima(res.trace, &all_warned);

  json records = json::array();
  for (const auto& p : res.trace) {
    records.push_back({{"iteration", p.iteration},
                       {"fi", p.fi},
                       {"kl", p.kl},
                       {"warned", p.warned}});
  }
  std::vector<std::string> warnings;
  if (all_warned) warnings.push_back("all FI/KL evaluations carried warnings");
  res.stats = {
      {"records", std::move(records)},
      {"min_fi",
       {{"metric", "min_fi"},
        {"value", min_fi},
        {"config_digest", cfg.digest()},
        {"grid", grid_json(cfg.diagnostics.grid)},
        {"warnings", warnings}}},
      {"min_kl",
       {{"metric", "min_kl"},
        {"value", min_kl},
        {"config_digest", cfg.digest()},
        {"grid", grid_json(cfg.diagnostics.grid)},
        {"warnings", warnings}}},
      {"em_max_ll_decrease", em_drop},
      {"posterior_mass_ratio", grid.mass_ratio()},
      {"divergences", res.batch.divergences.size()}};
  return res;
}

ExperimentResult run_gaussian_image(const ExperimentConfig& cfg) {
  const int n = cfg.problem.at("dim").get<int>();
  const int m = cfg.problem.at("measurements").get<int>();
  const double beta = std::sqrt(cfg.problem.at("beta2").get<double>());
  const double shift = cfg.problem.at("mode_shift").get<double>();
  const double base = cfg.problem.at("base_level").get<double>();
  const double pvar = cfg.problem.at("prior_variance").get<double>();
  const double noise_scale = cfg.problem.at("noise_scale").get<double>();

  RngStream rng(cfg.seed, kDataStream);
  const Mat a = gaussian_matrix(m, n, 1.0 / std::sqrt(n), rng);
  const Vec truth = const_vec(n, base);
  const Vec y = add_noise((a * truth).eval(), noise_scale * beta, rng);

  GaussianMixture prior = two_mode_iso(n, base, shift, pvar);
  GaussianLinearLikelihood lik(a, y, beta);

  ChainConfig ch = cfg.chain;
  ch.seed = cfg.seed;
  const ScoreModel score = cfg.score.build(prior);

  ExperimentResult res;
  res.batch = run_batch(ch, lik, score, cfg.threads);

  const GaussianMixture oracle = conjugate_posterior(prior, lik);
  const Mat alive = res.batch.alive_rows();
  const Classification cls =
      classify_modes(alive, {oracle.mean(0), oracle.mean(1)});

  json modes = json::array();
  for (int k = 0; k < 2; ++k) {
    const auto& mode = cls.modes[k];
    double within = 0.0;
    if (mode.count >= 2) {
      int ok = 0;
      for (int i = 0; i < n; ++i) {
        const double se = mode.sd[i] / std::sqrt(static_cast<double>(mode.count));
        if (std::abs(mode.mean[i] - oracle.mean(k)[i]) <= 3.0 * se) ++ok;
      }
      within = static_cast<double>(ok) / n;
    }
    modes.push_back(
        {{"count", mode.count},
         {"fraction", alive.rows() > 0
                          ? static_cast<double>(mode.count) / alive.rows()
                          : 0.0},
         {"frac_coords_within_3se", within},
         {"rms_gap_to_oracle",
          mode.count > 0 ? std::sqrt((mode.mean - oracle.mean(k)).squaredNorm() / n)
                         : std::numeric_limits<double>::infinity()}});
  }
  res.stats = {{"oracle_weights",
                std::vector<double>(oracle.weights().begin(),
                                    oracle.weights().end())},
               {"modes", std::move(modes)},
               {"pixel", safe_pixel_stats(alive, truth, psnr_max_ref(truth))},
               {"divergences", res.batch.divergences.size()}};
  return res;
}

ExperimentResult run_cs(const ExperimentConfig& cfg) {
  const int n = cfg.problem.at("dim").get<int>();
  const int m = cfg.problem.at("measurements").get<int>();
  const double beta = cfg.problem.at("beta").get<double>();
  double a_scale = cfg.problem.at("a_scale").get<double>();
  if (a_scale <= 0.0) a_scale = 1.0 / std::sqrt(n);

  GaussianMixture prior =
      two_mode_iso(n, cfg.problem.at("prior_base").get<double>(),
                   cfg.problem.at("prior_shift").get<double>(),
                   cfg.problem.at("prior_variance").get<double>());

  Vec truth;
  if (cfg.problem.contains("truth") && cfg.problem["truth"].is_array()) {
    const auto t = cfg.problem["truth"].get<std::vector<double>>();
    if (static_cast<int>(t.size()) != n) fail("problem.truth", "wrong length");
    truth = Eigen::Map<const Vec>(t.data(), t.size());
  } else {
    RngStream rng(cfg.seed, kTruthStream);
    truth = prior.sample(rng);
  }

  RngStream rng(cfg.seed, kDataStream);
  const Mat a = gaussian_matrix(m, n, a_scale, rng);
  const Vec y = add_noise((a * truth).eval(), beta, rng);
  GaussianLinearLikelihood lik(a, y, beta);

  ChainConfig ch = cfg.chain;
  ch.seed = cfg.seed;
  const ScoreModel score = cfg.score.build(prior);

  ExperimentResult res;
  res.batch = run_batch(ch, lik, score, cfg.threads);
  res.stats = {{"pixel", safe_pixel_stats(res.batch.alive_rows(), truth,
                                          psnr_max_ref(truth))},
               {"divergences", res.batch.divergences.size()}};
  return res;
}

std::vector<bool> radial_mask(int h, int w, double keep_fraction) {
  // Keep the lowest wrapped spatial frequencies, ordered by radius.
  struct Cell {
    double r2;
    int idx;
  };
  std::vector<Cell> cells(h * w);
  for (int u = 0; u < h; ++u) {
    const double du = std::min(u, h - u) / static_cast<double>(h);
    for (int v = 0; v < w; ++v) {
      const double dv = std::min(v, w - v) / static_cast<double>(w);
      cells[u * w + v] = {du * du + dv * dv, u * w + v};
    }
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.r2 < b.r2; });
  const int keep = std::clamp(
      static_cast<int>(std::lround(keep_fraction * h * w)), 1, h * w);
  std::vector<bool> mask(h * w, false);
  for (int i = 0; i < keep; ++i) mask[cells[i].idx] = true;
  return mask;
}

ExperimentResult run_mri_fourier(const ExperimentConfig& cfg) {
  const int h = cfg.problem.at("h").get<int>();
  const int w = cfg.problem.at("w").get<int>();
  const double beta = cfg.problem.at("beta").get<double>();
  const int n = h * w;

  std::vector<bool> mask;
  if (cfg.problem.contains("mask") && cfg.problem["mask"].is_array()) {
    for (const auto& b : cfg.problem["mask"]) mask.push_back(b.get<bool>());
    if (static_cast<int>(mask.size()) != n) fail("problem.mask", "wrong length");
  } else {
    mask = radial_mask(h, w, cfg.problem.at("keep_fraction").get<double>());
  }

  GaussianMixture prior =
      two_mode_iso(n, cfg.problem.at("prior_base").get<double>(),
                   cfg.problem.at("prior_shift").get<double>(),
                   cfg.problem.at("prior_variance").get<double>());

  Vec truth;
  if (cfg.problem.contains("truth") && cfg.problem["truth"].is_array()) {
    const auto t = cfg.problem["truth"].get<std::vector<double>>();
    if (static_cast<int>(t.size()) != n) fail("problem.truth", "wrong length");
    truth = Eigen::Map<const Vec>(t.data(), t.size());
  } else {
    RngStream rng(cfg.seed, kTruthStream);
    truth = prior.sample(rng);
  }

  int kept = 0;
  for (bool b : mask) kept += b ? 1 : 0;
  MaskedFourierLikelihood probe(mask, Vec::Zero(2 * kept), beta, h, w);
  RngStream rng(cfg.seed, kDataStream);
  const Vec y = add_noise(probe.forward(truth), beta, rng);
  MaskedFourierLikelihood lik(mask, y, beta, h, w);

  ChainConfig ch = cfg.chain;
  ch.seed = cfg.seed;
  const ScoreModel score = cfg.score.build(prior);

  ExperimentResult res;
  res.batch = run_batch(ch, lik, score, cfg.threads);
  res.stats = {{"kept_frequencies", kept},
               {"pixel", safe_pixel_stats(res.batch.alive_rows(), truth,
                                          psnr_max_ref(truth))},
               {"divergences", res.batch.divergences.size()}};
  return res;
}

ExperimentResult run_bhi(const ExperimentConfig& cfg) {
  const int h = cfg.problem.at("h").get<int>();
  const int w = cfg.problem.at("w").get<int>();
  const Vec truth = blob_image(h, w);

  const ClosureInstrument instrument = ring_instrument(
      cfg.problem.at("telescopes").get<int>(), cfg.problem.at("times").get<int>(),
      h, w, cfg.problem.at("max_baseline").get<double>(),
      cfg.problem.at("rotation_step").get<double>());

  const double thermal_std =
      cfg.problem.at("thermal_frac").get<double>() * truth.sum();
  RngStream rng(cfg.seed, kDataStream);
  const auto [beta_cph, beta_camp] = estimate_closure_noise(
      instrument, truth, thermal_std,
      cfg.problem.at("noise_replicas").get<int>(), rng);

  std::optional<double> r_g;
  if (!cfg.problem.at("r_g").is_null()) {
    r_g = cfg.problem.at("r_g").get<double>();
  }
  const ClosureLikelihood lik = simulate_measurements(
      truth, instrument, beta_cph, beta_camp,
      cfg.problem.at("rho").get<double>(), cfg.problem.at("gain_std").get<double>(),
      cfg.problem.at("phase_std").get<double>(),
      thermal_std, rng, r_g);

  const auto shift = cfg.problem.at("mode_shift").get<std::vector<int>>();
  if (shift.size() != 2) fail("problem.mode_shift", "expected 2 entries");
  const double blur = cfg.problem.at("mode_blur").get<double>();
  // Two prior modes: the blurred truth and its translate. Closure data are
  // invariant to translation, so both modes fit the measurements.
  const Vec mode_a = blur_image(truth, h, w, blur);
  const Vec mode_b =
      blur_image(shift_image(truth, h, w, shift[0], shift[1]), h, w, blur);
  Vec wts(2);
  wts << 0.5, 0.5;
  Vec vars(2);
  vars << cfg.problem.at("prior_variance").get<double>(),
      cfg.problem.at("prior_variance").get<double>();
  GaussianMixture prior = GaussianMixture::isotropic(
      std::move(wts), {mode_a, mode_b}, std::move(vars));

  ChainConfig ch = cfg.chain;
  ch.seed = cfg.seed;
  const ScoreModel score = cfg.score.build(prior);

  ExperimentResult res;
  res.batch = run_batch(ch, lik, score, cfg.threads);

  const Mat alive = res.batch.alive_rows();
  const Classification cls = classify_modes(alive, {mode_a, mode_b});
  std::vector<double> chi2_cph(alive.rows()), chi2_camp(alive.rows());
  double mean_cph = 0.0, mean_camp = 0.0;
  for (int i = 0; i < alive.rows(); ++i) {
    const auto c2 = lik.reduced_chi2(alive.row(i).transpose());
    chi2_cph[i] = c2.cph;
    chi2_camp[i] = c2.camp;
    mean_cph += c2.cph;
    mean_camp += c2.camp;
  }
  if (alive.rows() > 0) {
    mean_cph /= alive.rows();
    mean_camp /= alive.rows();
  }

  json per_mode = json::array();
  for (int k = 0; k < 2; ++k) {
    double c_cph = 0.0, c_camp = 0.0;
    int count = 0;
    for (int i = 0; i < alive.rows(); ++i) {
      if (cls.assignment[i] != k) continue;
      c_cph += chi2_cph[i];
      c_camp += chi2_camp[i];
      ++count;
    }
    per_mode.push_back({{"count", count},
                        {"chi2_cph_mean", count ? c_cph / count : 0.0},
                        {"chi2_camp_mean", count ? c_camp / count : 0.0}});
  }

  res.stats = {{"beta_cph", beta_cph},
               {"beta_camp", beta_camp},
               {"n_cph_per_step", static_cast<int>(instrument.triangles.size())},
               {"n_camp_per_step", static_cast<int>(instrument.quads.size())},
               {"chi2_cph_mean", mean_cph},
               {"chi2_camp_mean", mean_camp},
               {"chi2_cph", chi2_cph},
               {"chi2_camp", chi2_camp},
               {"per_mode", std::move(per_mode)},
               {"pixel", safe_pixel_stats(alive, truth, 1.0)},
               {"divergences", res.batch.divergences.size()}};
  return res;
}

}  // namespace

ScoreModel ScoreSpec::build(GaussianMixture prior) const {
  if (kind == "exact_gmm") return ScoreModel::exact(std::move(prior), r_s);
  if (kind == "noisy_gmm") {
    std::optional<double> std_dev = noise_std;
    if (!std_dev && noise_std_scale != 1.0) {
      std_dev = noise_std_scale * eps_max / std::sqrt(prior.dim());
    }
    return ScoreModel::noisy(std::move(prior), eps_max, r_s, std_dev);
  }
  fail("score.kind", "expected exact_gmm or noisy_gmm");
}

std::string ExperimentConfig::digest() const { return hex_digest(effective.dump()); }

ExperimentConfig ExperimentConfig::parse(const json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) fail("config", "expected a JSON object");
  const json& kind = need(j, "experiment", "config");
  if (!kind.is_string()) fail("experiment", "expected a string");
  cfg.kind = kind.get<std::string>();
  static const std::set<std::string> kinds = {"validate2d", "gaussian_image",
                                              "cs", "mri_fourier", "bhi"};
  if (!kinds.count(cfg.kind)) fail("experiment", "unknown kind '" + cfg.kind + "'");

  if (!j.contains("seed") || !j["seed"].is_number()) fail("seed", "missing integer");
  cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.output_dir = j.value("output_dir", std::string("out/") + cfg.kind);
  cfg.threads = opt_int(j, "threads", 1);
  if (cfg.threads < 1) fail("threads", "must be >= 1");

  const json& ch = need(j, "chain", "config");
  cfg.chain.gamma = need_num(ch, "gamma", "chain");
  cfg.chain.n_iters = static_cast<int>(need_num(ch, "iterations", "chain"));
  cfg.chain.batch = static_cast<int>(need_num(ch, "batch", "chain"));
  const std::string disc =
      need(ch, "discretization", "chain").get<std::string>();
  if (disc == "pnp") {
    cfg.chain.discretization = Discretization::Pnp;
  } else if (disc == "red") {
    cfg.chain.discretization = Discretization::Red;
  } else {
    fail("chain.discretization", "expected pnp or red");
  }
  cfg.chain.annealed = ch.value("annealed", false);
  if (cfg.chain.annealed) {
    const json& s = need(ch, "schedule", "chain");
    cfg.chain.schedule.sigma0 = need_num(s, "sigma0", "chain.schedule");
    cfg.chain.schedule.xi = need_num(s, "xi", "chain.schedule");
    cfg.chain.schedule.sigma_min = opt_num(s, "sigma_min", 0.0);
    cfg.chain.schedule.alpha0 = need_num(s, "alpha0", "chain.schedule");
  } else {
    cfg.chain.sigma_static = opt_num(ch, "sigma_static", 0.0);
    cfg.chain.alpha_static = opt_num(ch, "alpha_static", 1.0);
  }
  cfg.chain.deterministic = ch.value("deterministic", false);
  const json& box = need(ch, "init_box", "chain");
  if (!box.is_array() || box.size() != 2) {
    fail("chain.init_box", "expected [lo, hi]");
  }
  cfg.chain.init_lo = box[0].get<double>();
  cfg.chain.init_hi = box[1].get<double>();
  cfg.chain.snapshot_every = opt_int(ch, "snapshot_every", 0);
  try {
    cfg.chain.validate();
  } catch (const std::invalid_argument& e) {
    fail("chain", e.what());
  }

  const json sc = j.value("score", json::object());
  cfg.score.kind = sc.value("kind", std::string("exact_gmm"));
  if (cfg.score.kind != "exact_gmm" && cfg.score.kind != "noisy_gmm") {
    fail("score.kind", "expected exact_gmm or noisy_gmm");
  }
  cfg.score.eps_max = opt_num(sc, "eps_max", 0.0);
  if (cfg.score.eps_max < 0.0) fail("score.eps_max", "must be >= 0");
  if (sc.contains("r_s") && !sc["r_s"].is_null()) {
    cfg.score.r_s = sc["r_s"].get<double>();
    if (!(*cfg.score.r_s > 0.0)) fail("score.r_s", "must be > 0");
  }
  if (sc.contains("noise_std") && !sc["noise_std"].is_null()) {
    cfg.score.noise_std = sc["noise_std"].get<double>();
    if (*cfg.score.noise_std < 0.0) fail("score.noise_std", "must be >= 0");
  }
  cfg.score.noise_std_scale = opt_num(sc, "noise_std_scale", 1.0);
  if (cfg.score.noise_std_scale < 0.0) {
    fail("score.noise_std_scale", "must be >= 0");
  }

  const json dg = j.value("diagnostics", json::object());
  const json grid = dg.value("grid", json::object());
  const double lo = opt_num(grid, "lo", -50.0);
  const double hi = opt_num(grid, "hi", 50.0);
  const int cells = opt_int(grid, "cells", 1000);
  cfg.diagnostics.grid = Grid2D{lo, hi, lo, hi, cells, cells};
  try {
    cfg.diagnostics.grid.validate();
  } catch (const std::invalid_argument& e) {
    fail("diagnostics.grid", e.what());
  }
  cfg.diagnostics.eval_every = opt_int(dg, "eval_every", 50);
  cfg.diagnostics.em_components = opt_int(dg, "em_components", 2);
  cfg.diagnostics.em_restarts = opt_int(dg, "em_restarts", 5);
  if (cfg.diagnostics.eval_every < 1) fail("diagnostics.eval_every", "must be >= 1");
  if (cfg.diagnostics.em_components < 1) fail("diagnostics.em_components", "must be >= 1");
  if (cfg.diagnostics.em_restarts < 1) fail("diagnostics.em_restarts", "must be >= 1");

  cfg.problem = problem_defaults(cfg.kind);
  if (j.contains("problem")) {
    const json& p = j["problem"];
    if (!p.is_object()) fail("problem", "expected an object");
    for (const auto& [key, value] : p.items()) {
      if (!cfg.problem.contains(key)) {
        fail("problem." + key, "unknown field for " + cfg.kind);
      }
      cfg.problem[key] = value;
    }
  }

  // Canonical echo: re-serialize exactly what will run.
  json eff;
  eff["experiment"] = cfg.kind;
  eff["seed"] = cfg.seed;
  eff["output_dir"] = cfg.output_dir.string();
  eff["threads"] = cfg.threads;
  eff["chain"] = chain_config_to_json(cfg.chain);
  eff["chain"].erase("seed");  // the top-level seed is authoritative
  json score_eff = {{"kind", cfg.score.kind}, {"eps_max", cfg.score.eps_max}};
  score_eff["r_s"] = cfg.score.r_s ? json(*cfg.score.r_s) : json(nullptr);
  score_eff["noise_std"] =
      cfg.score.noise_std ? json(*cfg.score.noise_std) : json(nullptr);
  score_eff["noise_std_scale"] = cfg.score.noise_std_scale;
  eff["score"] = std::move(score_eff);
  eff["diagnostics"] = {{"grid", grid_json(cfg.diagnostics.grid)},
                        {"eval_every", cfg.diagnostics.eval_every},
                        {"em_components", cfg.diagnostics.em_components},
                        {"em_restarts", cfg.diagnostics.em_restarts}};
  eff["problem"] = cfg.problem;
  cfg.effective = std::move(eff);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  ExperimentConfig cfg = parse(read_json_file(file));
  if (const char* root = std::getenv("PMC_OUTPUT_ROOT")) {
    if (cfg.output_dir.is_relative()) {
      cfg.output_dir = std::filesystem::path(root) / cfg.output_dir;
      cfg.effective["output_dir"] = cfg.output_dir.string();
    }
  }
  return cfg;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files) {
  ExperimentResult res;
  if (cfg.kind == "validate2d") {
    res = run_validate2d(cfg);
  } else if (cfg.kind == "gaussian_image") {
    res = run_gaussian_image(cfg);
  } else if (cfg.kind == "cs") {
    res = run_cs(cfg);
  } else if (cfg.kind == "mri_fourier") {
    res = run_mri_fourier(cfg);
  } else if (cfg.kind == "bhi") {
    res = run_bhi(cfg);
  } else {
    fail("experiment", "unknown kind '" + cfg.kind + "'");
  }
  res.out_dir = cfg.output_dir;
  if (write_files) write_outputs(cfg, res);
  return res;
}

SweepResult run_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<double>& values, int realizations,
                      bool write_files) {
  if (base.kind != "validate2d") {
    fail("sweep", "parameter sweeps are defined for validate2d experiments");
  }
  if (param != "gamma" && param != "sigma_min" && param != "eps_max") {
    fail("sweep.param", "expected gamma, sigma_min or eps_max");
  }
  if (values.empty()) fail("sweep.values", "need at least one value");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) fail("sweep.values", "values must be positive");
    if (i > 0 && !(values[i] < values[i - 1])) {
      fail("sweep.values", "values must be strictly decreasing");
    }
  }
  if (param == "eps_max" && base.score.kind != "noisy_gmm") {
    fail("sweep", "eps_max sweep requires score.kind = noisy_gmm");
  }
  if (realizations < 1) fail("sweep", "need >= 1 realization");

  SweepResult out;
  out.param = param;
  bool clamped = false;

  for (int r = 0; r < realizations; ++r) {
    Posterior2D post = build_2d_posterior(base.problem, base.seed, r);
    const PosteriorGrid grid(&post.lik, post.prior, base.diagnostics.grid);
    for (size_t vi = 0; vi < values.size(); ++vi) {
      const double v = values[vi];
      ChainConfig ch = base.chain;
      ScoreSpec score_spec = base.score;
      if (param == "gamma") {
        ch.gamma = v;
      } else if (param == "sigma_min") {
        ch.schedule.sigma_min = v;
        const double cap = 1.0 / (v * v);
        if (ch.schedule.alpha0 > cap) {
          ch.schedule.alpha0 = cap;
          clamped = true;
        }
      } else {
        score_spec.eps_max = v;
      }
      const std::string cell_key = std::to_string(base.seed) + "/" + param +
                                   "/" + std::to_string(vi) + "/" +
                                   std::to_string(r);
      ch.seed = fnv1a64(cell_key);
      if (ch.snapshot_every == 0) ch.snapshot_every = base.diagnostics.eval_every;
      const ScoreModel score = score_spec.build(post.prior);
      const SampleBatch batch = run_batch(ch, post.lik, score, base.threads);
      const auto trace = fi_kl_trace(batch, grid, base.diagnostics, ch.seed,
                                     &out.em_max_ll_decrease);
      const auto [min_fi, min_kl] = trace_minima(trace, nullptr);
      out.rows.push_back({v, r, min_fi, min_kl});
    }
  }
  if (clamped) {
    out.warnings.push_back(
        "alpha0 clamped to 1/sigma_min^2 for some sigma_min cells");
  }

  for (size_t vi = 0; vi < values.size(); ++vi) {
    double fi = 0.0, kl = 0.0;
    int count = 0;
    for (const auto& row : out.rows) {
      if (row.value == values[vi]) {
        fi += row.min_fi;
        kl += row.min_kl;
        ++count;
      }
    }
    out.aggregates.push_back({values[vi], fi / count, kl / count});
  }

  if (write_files) {
    namespace fs = std::filesystem;
    fs::create_directories(base.output_dir);
    {
      std::ofstream csv(base.output_dir / "sweep.csv");
      csv << "param,value,realization,min_fi,min_kl\n";
      char buf[128];
      for (const auto& row : out.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%.17g,%.17g\n",
                      param.c_str(), row.value, row.realization, row.min_fi,
                      row.min_kl);
        csv << buf;
      }
    }
    {
      std::ofstream csv(base.output_dir / "sweep_agg.csv");
      csv << "param,value,mean_min_fi,mean_min_kl\n";
      char buf[128];
      for (const auto& agg : out.aggregates) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", param.c_str(),
                      agg.value, agg.mean_min_fi, agg.mean_min_kl);
        csv << buf;
      }
    }
    json meta;
    meta["config"] = base.effective;
    meta["config_digest"] = base.digest();
    meta["param"] = param;
    meta["values"] = values;
    meta["realizations"] = realizations;
    meta["versions"] = versions_json();
    meta["warnings"] = out.warnings;
    write_json_file(base.output_dir / "meta.json", meta);
  }
  return out;
}

std::vector<std::string> describe_config(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  lines.push_back("experiment: " + cfg.kind);
  lines.push_back("seed: " + std::to_string(cfg.seed));
  lines.push_back("output_dir: " + cfg.output_dir.string());
  lines.push_back(
      "chain: " + std::string(cfg.chain.discretization == Discretization::Pnp
                                  ? "pnp"
                                  : "red") +
      (cfg.chain.annealed ? " annealed" : " stationary") + ", gamma " +
      std::to_string(cfg.chain.gamma) + ", iterations " +
      std::to_string(cfg.chain.n_iters) + ", batch " +
      std::to_string(cfg.chain.batch));
  lines.push_back("score: " + cfg.score.kind);
  lines.push_back("config_digest: " + cfg.digest());
  return lines;
}

}  // namespace pmc
