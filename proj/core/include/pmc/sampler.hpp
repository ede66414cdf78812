// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_SAMPLER_HPP
#define PMC_SAMPLER_HPP

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmc/likelihood.hpp"
#include "pmc/schedule.hpp"
#include "pmc/score_model.hpp"

namespace pmc {

enum class Discretization { Pnp, Red };

/// Thrown when a chain iterate goes non-finite; iteration is the step index
/// (-1 when raised from a standalone step call).
struct chain_divergence_error : std::runtime_error {
  int iteration;
  explicit chain_divergence_error(int it)
      : std::runtime_error("chain diverged (non-finite iterate)"),
        iteration(it) {}
};

/// Everything a batch run needs: step size, iteration and chain counts, the
/// master seed, the discretization rule, and either an annealing schedule or
/// the static (sigma, alpha) pair. deterministic = true suppresses the
/// sqrt(2 gamma) Z noise, turning the chain into plain gradient flow.
struct ChainConfig {
  double gamma = 1e-3;
  int n_iters = 1;
  int batch = 1;
  std::uint64_t seed = 0;
  Discretization discretization = Discretization::Red;
  bool annealed = false;
  AnnealingSchedule schedule;
  double sigma_static = 0.0;
  double alpha_static = 1.0;
  bool deterministic = false;
  double init_lo = -1.0;
  double init_hi = 1.0;
  /// 0 disables trajectory snapshots; otherwise the batch state is recorded
  /// after every snapshot_every-th iteration (and after the last).
  int snapshot_every = 0;

  void validate() const;
};

struct Divergence {
  int chain;
  int iteration;
};

struct Snapshot {
  int iteration;
  Mat state;  // batch x n, rows of dead chains hold their last finite iterate
};

/// Final iterates of a batch of chains plus run metadata. Row i always
/// belongs to chain i (stream id i), independent of execution order.
struct SampleBatch {
  Mat samples;  // batch x n
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<Divergence> divergences;
  std::vector<Snapshot> snapshots;
  double wall_seconds = 0.0;

  /// Rows of chains that finished without diverging.
  Mat alive_rows() const;
  std::vector<bool> alive_mask() const;
};

/// One unadjusted Langevin step with the score evaluated at the current
/// iterate: x - gamma (grad g(x) - alpha S(x, sigma)) + sqrt(2 gamma) Z.
Vec pmc_red_step(const Vec& x, const Likelihood& lik, const ScoreModel& score,
                 double gamma, double sigma, double alpha, RngStream& rng,
                 bool deterministic);

/// One step with the score evaluated at the likelihood-shifted point:
/// x - gamma (grad g(x) - alpha S(x - gamma grad g(x), sigma)) + sqrt(2g) Z.
Vec pmc_pnp_step(const Vec& x, const Likelihood& lik, const ScoreModel& score,
                 double gamma, double sigma, double alpha, RngStream& rng,
                 bool deterministic);

/// Runs cfg.batch independent chains for cfg.n_iters steps each. Chain i
/// draws from RngStream(cfg.seed, i): first n uniforms for the init box,
/// then per iteration the score-noise normals (noisy models only) followed
/// by the n step normals. A chain that produces a non-finite coordinate (or
/// a degenerate measurement) is aborted and recorded; the rest of the batch
/// is unaffected. threads > 1 splits chains across worker threads with
/// bit-identical results.
SampleBatch run_batch(const ChainConfig& cfg, const Likelihood& lik,
                      const ScoreModel& score, int threads = 1);

/// Canonical JSON form of the config (keys sorted by nlohmann).
nlohmann::json chain_config_to_json(const ChainConfig& cfg);

/// FNV-1a digest of the canonical JSON form of the config.
std::string chain_config_digest(const ChainConfig& cfg);

}  // namespace pmc

#endif  // PMC_SAMPLER_HPP
