#pragma once

#include "qctraj/config.hpp"
#include "qctraj/semigroup.hpp"

namespace qctraj {

inline constexpr const char* kVersion = "0.1.0";

struct ManifestEntry {
  std::string file;
  std::string digest;  // fnv1a-64, hex
};

struct RunManifest {
  nlohmann::json config_echo;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::vector<CheckReport> checks;
  double wall_clock_s = 0.0;
  std::vector<ManifestEntry> outputs;
  std::string combined_digest;
  std::string note;  // partial-run annotation on aborts

  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Executes the configured simulations and checks and writes every requested
/// output plus manifest.json into the output directory. Results are
/// bit-identical for identical (config, seed) regardless of the worker
/// count. With checks_only, data files are skipped and only checks run.
RunManifest run_scenario(const RunConfig& config, bool checks_only = false);

/// Output directory after applying the QCTRAJ_OUTPUT_DIR override.
std::string resolve_output_dir(const RunConfig& config);

std::string fnv1a_hex(const std::string& bytes);
std::string digest_file(const std::string& path);

}  // namespace qctraj
