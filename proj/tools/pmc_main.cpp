// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: `pmc run <config>` executes one experiment, `pmc sweep`
// repeats a validate2d experiment over a decreasing parameter grid, and
// `pmc validate` checks a config without running it.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "pmc/experiments.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    values.push_back(std::stod(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play Monte Carlo posterior sampling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string param;
  std::string values_csv;
  int realizations = 20;

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* sweep = app.add_subcommand(
      "sweep", "Sweep one parameter of a validate2d experiment");
  sweep->add_option("config", config_path, "JSON config file")->required();
  sweep->add_option("--param", param, "gamma | sigma_min | eps_max")
      ->required();
  sweep->add_option("--values", values_csv, "comma-separated decreasing values")
      ->required();
  sweep->add_option("--realizations", realizations,
                    "random posterior realizations per value");

  auto* validate =
      app.add_subcommand("validate", "Parse and validate a config (dry run)");
  validate->add_option("config", config_path, "JSON config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const pmc::ExperimentConfig cfg = pmc::ExperimentConfig::load(config_path);
    if (validate->parsed()) {
      for (const auto& line : pmc::describe_config(cfg)) {
        std::printf("%s\n", line.c_str());
      }
      std::printf("ok\n");
      return 0;
    }
    if (run->parsed()) {
      const pmc::ExperimentResult res = pmc::run_experiment(cfg);
      std::printf("wrote %s (digest %s, %zu divergences)\n",
                  res.out_dir.string().c_str(), cfg.digest().c_str(),
                  res.batch.divergences.size());
      return 0;
    }
    const pmc::SweepResult res =
        pmc::run_sweep(cfg, param, parse_values(values_csv), realizations);
    for (const auto& agg : res.aggregates) {
      std::printf("%s=%g  mean min FI %.6g  mean min KL %.6g\n", param.c_str(),
                  agg.value, agg.mean_min_fi, agg.mean_min_kl);
    }
    std::printf("wrote %s\n", cfg.output_dir.string().c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
