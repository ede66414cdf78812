// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmc/io.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "pmc/sampler.hpp"

namespace pmc {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex_digest(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return std::string(buf);
}

void write_matrix_csv(const std::filesystem::path& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Mat read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("ragged CSV: " + path.string());
    }
    rows.push_back(std::move(row));
  }
  Mat m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    m.row(i) = Eigen::Map<const Vec>(rows[i].data(), rows[i].size());
  }
  return m;
}

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  return nlohmann::json::parse(in);
}

void save_sample_batch(const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path,
                       const SampleBatch& batch) {
  write_matrix_csv(csv_path, batch.samples);
  nlohmann::json j;
  j["config_digest"] = batch.config_digest;
  j["seed"] = batch.seed;
  j["wall_seconds"] = batch.wall_seconds;
  nlohmann::json divs = nlohmann::json::array();
  for (const auto& d : batch.divergences) {
    divs.push_back({{"chain", d.chain}, {"iteration", d.iteration}});
  }
  j["divergences"] = std::move(divs);
  j["rows"] = batch.samples.rows();
  j["cols"] = batch.samples.cols();
  write_json_file(sidecar_path, j);
}

}  // namespace pmc
