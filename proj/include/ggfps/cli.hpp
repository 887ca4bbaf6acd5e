#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace ggfps::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "ggfps-lab 1.0.0";

/// A parsed run configuration plus the directory relative paths resolve against.
struct RunConfig
{
  nlohmann::json doc;
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;

  /// Throws ConfigError for missing schema_version/seed or a missing section.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(nlohmann::json doc, std::filesystem::path base_dir);

  const nlohmann::json& section(const char* name) const;
};

/// Writes dataset.csv, dataset.json and manifest.json (plus surface_grid.csv
/// when generate.grid_resolution > 0).
void cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir);

/// Writes selection.json.
void cmd_sample(const RunConfig& config, const std::filesystem::path& out_dir);

/// Writes curves.csv, bins.csv, kde.csv, heatmap.csv (2D data only) and manifest.json.
void cmd_curve(const RunConfig& config, const std::filesystem::path& out_dir, unsigned threads);

/// --threads wins, then GGFPS_LAB_THREADS, then 0 (auto).
unsigned resolve_threads(std::optional<unsigned> flag);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

} // namespace ggfps::cli
