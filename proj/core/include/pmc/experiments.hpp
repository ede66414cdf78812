// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_EXPERIMENTS_HPP
#define PMC_EXPERIMENTS_HPP

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pmc/grid_metrics.hpp"
#include "pmc/sampler.hpp"

namespace pmc {

/// Configuration problems carry the JSON path of the offending field.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScoreSpec {
  std::string kind = "exact_gmm";  // exact_gmm | noisy_gmm
  double eps_max = 0.0;
  std::optional<double> r_s;
  /// Absolute per-coordinate noise deviation; overrides noise_std_scale.
  std::optional<double> noise_std;
  /// Pre-truncation deviation as a multiple of eps_max / sqrt(n), so swept
  /// eps_max values rescale their noise proportionally. 1 puts the typical
  /// perturbation norm right at the eps_max bound.
  double noise_std_scale = 1.0;

  ScoreModel build(GaussianMixture prior) const;
};

struct DiagnosticsSpec {
  Grid2D grid;
  int eval_every = 50;
  int em_components = 2;
  int em_restarts = 5;
};

/// A parsed experiment document. `effective` is the canonical re-serialized
/// config with defaults filled in; its dump feeds the digest, and running the
/// echoed copy reproduces the run byte for byte.
struct ExperimentConfig {
  std::string kind;  // validate2d | gaussian_image | cs | mri_fourier | bhi
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  int threads = 1;
  ChainConfig chain;
  ScoreSpec score;
  DiagnosticsSpec diagnostics;
  nlohmann::json problem;
  nlohmann::json effective;

  std::string digest() const;
  static ExperimentConfig parse(const nlohmann::json& j);
  /// Reads a config file; PMC_OUTPUT_ROOT, when set, re-roots a relative
  /// output_dir.
  static ExperimentConfig load(const std::filesystem::path& file);
};

struct TracePoint {
  int iteration;
  double fi;
  double kl;
  bool warned;
};

struct ExperimentResult {
  nlohmann::json stats;
  SampleBatch batch;
  std::vector<TracePoint> trace;  // validate2d only
  std::filesystem::path out_dir;
};

/// Builds the posterior, runs the batch, computes the per-kind diagnostics
/// and (when write_files) persists samples.csv, stats.json, traces.csv (2D
/// kinds) and meta.json under cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                bool write_files = true);

struct SweepRow {
  double value;
  int realization;
  double min_fi;
  double min_kl;
};

struct SweepAggregate {
  double value;
  double mean_min_fi;
  double mean_min_kl;
};

struct SweepResult {
  std::string param;
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
  std::vector<std::string> warnings;
  /// Largest relative per-iteration log-likelihood drop seen across every EM
  /// fit of the sweep (zero when EM was monotone throughout).
  double em_max_ll_decrease = 0.0;
};

/// Sweeps one parameter of a validate2d experiment over positive decreasing
/// values, running `realizations` random posterior realizations per value
/// (fixed prior, fresh A and measurement noise per realization). Emits one
/// row per (value, realization) with the minimum FI/KL over the trajectory,
/// plus per-value means. param is one of gamma | sigma_min | eps_max.
SweepResult run_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<double>& values, int realizations = 20,
                      bool write_files = true);

/// Validates without running; returns human-readable summary lines.
std::vector<std::string> describe_config(const ExperimentConfig& cfg);

}  // namespace pmc

#endif  // PMC_EXPERIMENTS_HPP
