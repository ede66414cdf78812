// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

#include "pmc/io.hpp"

namespace pmc {

void ChainConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("ChainConfig: gamma must be > 0");
  if (n_iters < 1) throw std::invalid_argument("ChainConfig: n_iters must be >= 1");
  if (batch < 1) throw std::invalid_argument("ChainConfig: batch must be >= 1");
  if (!(init_lo < init_hi)) {
    throw std::invalid_argument("ChainConfig: init box must satisfy lo < hi");
  }
  if (annealed) {
    schedule.validate();
  } else {
    if (sigma_static < 0.0) {
      throw std::invalid_argument("ChainConfig: sigma_static must be >= 0");
    }
    if (!(alpha_static >= 1.0)) {
      throw std::invalid_argument("ChainConfig: alpha_static must be >= 1");
    }
  }
  if (snapshot_every < 0) {
    throw std::invalid_argument("ChainConfig: snapshot_every must be >= 0");
  }
}

namespace {

const char* disc_name(Discretization d) {
  return d == Discretization::Pnp ? "pnp" : "red";
}

struct StepScratch {
  Vec g;
  Vec shifted;
  Vec s;
  LikScratch lik;
};

// Shared body of both discretizations; updates x in place. Per-iteration
// draw order is fixed: score noise first (when the model is noisy), then the
// n step normals. Deterministic mode draws no step normals.
inline void step_into(Vec& x, Discretization disc, const Likelihood& lik,
                      const ScoreModel& score, double gamma, double sigma,
                      double alpha, RngStream& rng, bool deterministic,
                      StepScratch& ws) {
  lik.grad_into(x, ws.g, ws.lik);
  if (disc == Discretization::Pnp) {
    ws.shifted = x;
    ws.shifted.noalias() -= gamma * ws.g;
    score.eval_into(ws.shifted, sigma, rng, ws.s);
  } else {
    score.eval_into(x, sigma, rng, ws.s);
  }
  x.noalias() -= gamma * ws.g;
  x.noalias() += (gamma * alpha) * ws.s;
  if (!deterministic) {
    const double c = std::sqrt(2.0 * gamma);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += c * rng.normal();
  }
}

Vec checked_step(const Vec& x, Discretization disc, const Likelihood& lik,
                 const ScoreModel& score, double gamma, double sigma,
                 double alpha, RngStream& rng, bool deterministic) {
  if (!(gamma > 0.0)) throw std::invalid_argument("step: gamma must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("step: sigma must be >= 0");
  if (!(alpha >= 1.0)) throw std::invalid_argument("step: alpha must be >= 1");
  ensure_finite(x, "step input");
  Vec out = x;
  StepScratch ws;
  step_into(out, disc, lik, score, gamma, sigma, alpha, rng, deterministic, ws);
  if (!out.allFinite()) {
    throw chain_divergence_error(-1);
  }
  return out;
}

}  // namespace

Vec pmc_red_step(const Vec& x, const Likelihood& lik, const ScoreModel& score,
                 double gamma, double sigma, double alpha, RngStream& rng,
                 bool deterministic) {
  return checked_step(x, Discretization::Red, lik, score, gamma, sigma, alpha,
                      rng, deterministic);
}

Vec pmc_pnp_step(const Vec& x, const Likelihood& lik, const ScoreModel& score,
                 double gamma, double sigma, double alpha, RngStream& rng,
                 bool deterministic) {
  return checked_step(x, Discretization::Pnp, lik, score, gamma, sigma, alpha,
                      rng, deterministic);
}

Mat SampleBatch::alive_rows() const {
  const auto mask = alive_mask();
  int alive = 0;
  for (bool b : mask) alive += b ? 1 : 0;
  Mat out(alive, samples.cols());
  int r = 0;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (mask[i]) out.row(r++) = samples.row(i);
  }
  return out;
}

std::vector<bool> SampleBatch::alive_mask() const {
  std::vector<bool> mask(samples.rows(), true);
  for (const auto& d : divergences) mask[d.chain] = false;
  return mask;
}

nlohmann::json chain_config_to_json(const ChainConfig& cfg) {
  nlohmann::json j;
  j["gamma"] = cfg.gamma;
  j["iterations"] = cfg.n_iters;
  j["batch"] = cfg.batch;
  j["seed"] = cfg.seed;
  j["discretization"] = disc_name(cfg.discretization);
  j["annealed"] = cfg.annealed;
  if (cfg.annealed) {
    j["schedule"] = {{"sigma0", cfg.schedule.sigma0},
                     {"xi", cfg.schedule.xi},
                     {"sigma_min", cfg.schedule.sigma_min},
                     {"alpha0", cfg.schedule.alpha0}};
  } else {
    j["sigma_static"] = cfg.sigma_static;
    j["alpha_static"] = cfg.alpha_static;
  }
  j["deterministic"] = cfg.deterministic;
  j["init_box"] = {cfg.init_lo, cfg.init_hi};
  j["snapshot_every"] = cfg.snapshot_every;
  return j;
}

std::string chain_config_digest(const ChainConfig& cfg) {
  return hex_digest(chain_config_to_json(cfg).dump());
}

SampleBatch run_batch(const ChainConfig& cfg, const Likelihood& lik,
                      const ScoreModel& score, int threads) {
  cfg.validate();
  const int n = lik.dim();
  if (score.dim() != n) {
    throw std::invalid_argument("run_batch: likelihood/score dimension mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();

  // Per-iteration (sigma_k, alpha_k), shared by all chains.
  std::vector<std::pair<double, double>> knobs(cfg.n_iters);
  for (int k = 0; k < cfg.n_iters; ++k) {
    knobs[k] = cfg.annealed
                   ? cfg.schedule.at(k)
                   : std::make_pair(cfg.sigma_static, cfg.alpha_static);
  }

  std::vector<int> snap_iters;
  if (cfg.snapshot_every > 0) {
    for (int k = cfg.snapshot_every; k < cfg.n_iters; k += cfg.snapshot_every) {
      snap_iters.push_back(k);
    }
    snap_iters.push_back(cfg.n_iters);
  }

  SampleBatch out;
  out.seed = cfg.seed;
  out.config_digest = chain_config_digest(cfg);
  out.samples.resize(cfg.batch, n);
  out.snapshots.resize(snap_iters.size());
  for (size_t s = 0; s < snap_iters.size(); ++s) {
    out.snapshots[s].iteration = snap_iters[s];
    out.snapshots[s].state.resize(cfg.batch, n);
  }

  std::vector<std::vector<Divergence>> divs(std::max(threads, 1));

  auto worker = [&](int tid, int lo, int hi) {
    StepScratch ws;
    Vec x(n), x_prev(n);
    for (int chain = lo; chain < hi; ++chain) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(chain));
      for (int i = 0; i < n; ++i) x[i] = rng.uniform(cfg.init_lo, cfg.init_hi);
      size_t snap = 0;
      bool dead = false;
      for (int k = 0; k < cfg.n_iters && !dead; ++k) {
        x_prev = x;
        const auto [sigma_k, alpha_k] = knobs[k];
        try {
          step_into(x, cfg.discretization, lik, score, cfg.gamma, sigma_k,
                    alpha_k, rng, cfg.deterministic, ws);
          if (!x.allFinite()) throw chain_divergence_error(k);
        } catch (const chain_divergence_error&) {
          divs[tid].push_back({chain, k});
          x = x_prev;  // keep the last finite iterate
          dead = true;
        } catch (const degenerate_measurement_error&) {
          divs[tid].push_back({chain, k});
          x = x_prev;
          dead = true;
        }
        while (snap < snap_iters.size() && snap_iters[snap] == k + 1) {
          out.snapshots[snap].state.row(chain) = x.transpose();
          ++snap;
        }
      }
      // Dead chains carry the last finite iterate into remaining snapshots.
      for (; snap < snap_iters.size(); ++snap) {
        out.snapshots[snap].state.row(chain) = x.transpose();
      }
      out.samples.row(chain) = x.transpose();
    }
  };

  threads = std::max(1, std::min(threads, cfg.batch));
  if (threads == 1) {
    worker(0, 0, cfg.batch);
  } else {
    std::vector<std::thread> pool;
    const int per = (cfg.batch + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * per;
      const int hi = std::min(cfg.batch, lo + per);
      if (lo < hi) pool.emplace_back(worker, t, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (auto& d : divs) {
    out.divergences.insert(out.divergences.end(), d.begin(), d.end());
  }
  std::sort(out.divergences.begin(), out.divergences.end(),
            [](const Divergence& a, const Divergence& b) {
              return a.chain < b.chain;
            });

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace pmc
