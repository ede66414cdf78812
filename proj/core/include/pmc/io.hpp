// Copyright 2026 The pmc Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PMC_IO_HPP
#define PMC_IO_HPP

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <string_view>

#include "pmc/gaussian_mixture.hpp"

namespace pmc {

struct SampleBatch;

/// FNV-1a 64-bit hash, printed as 16 hex digits. Used as a config digest,
/// not for anything security-sensitive.
std::uint64_t fnv1a64(std::string_view data);
std::string hex_digest(std::string_view data);

/// Writes a matrix as plain CSV with %.17g fields (lossless round trip).
void write_matrix_csv(const std::filesystem::path& path, const Mat& m);
Mat read_matrix_csv(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// samples.csv (one row per chain) plus a JSON sidecar carrying the config
/// digest, seed, divergence list and wall-clock time.
void save_sample_batch(const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path,
                       const SampleBatch& batch);

}  // namespace pmc

#endif  // PMC_IO_HPP
