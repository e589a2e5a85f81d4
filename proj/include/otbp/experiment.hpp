#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otbp/breakdown.hpp"
#include "otbp/costs.hpp"
#include "otbp/errors.hpp"
#include "otbp/pointset.hpp"

namespace otbp {

enum class RunMode { certify, attack, depth_only, convergence };
std::string to_string(RunMode mode);

struct CloudSource {
  std::optional<std::filesystem::path> file;  // absolute once parsed
  Distribution dist = Distribution::uniform_ball;
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;

  PointCloud load() const;
};

struct ExperimentConfig {
  RunMode mode = RunMode::certify;
  std::optional<CloudSource> reference;
  std::optional<CloudSource> target;
  std::vector<CostSpec> costs;
  std::optional<std::vector<std::size_t>> targets;  // 0-based; unset means every point
  std::filesystem::path output_dir;
  AttackOptions schedule;
  std::size_t threads = 1;

  // attack mode
  std::size_t attack_m = 1;
  AttackMode attack_mode = AttackMode::isolated;

  // depth_only mode
  std::string depth_method = "exact";  // exact, sweep2d, sampled
  std::size_t depth_dirs = 10000;
  std::uint64_t depth_seed = 0;

  // convergence mode
  std::vector<std::size_t> n_grid;
  double radius = 0.5;
  std::uint64_t convergence_seed = 0;
  std::size_t mc_draws = 1000000;
  double mc_tolerance = 0.002;
};

// Relative file paths resolve against base_dir. Errors name the offending
// field path, e.g. "costs[1].p".
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
// Normalized echo: every default spelled out, paths absolute.
nlohmann::json to_json(const ExperimentConfig& config);

struct CellFailure {
  std::string cell;
  std::string error;
  ExitCode code = ExitCode::internal;
};

struct RunResult {
  ExitCode code = ExitCode::success;
  std::string summary_csv;
  std::string digest;
  std::filesystem::path manifest_path;
  std::vector<CellFailure> failures;
  std::size_t falsifications = 0;
};

std::string summary_header(RunMode mode);

// Writes reports/, summary.csv and manifest.json under config.output_dir.
RunResult run(const ExperimentConfig& config);

// Re-runs the manifest's configuration into `output_dir` (default: a
// "replay" directory next to the manifest) and compares the summary digest.
// Throws InternalError on divergent output.
RunResult replay(const std::filesystem::path& manifest,
                 const std::optional<std::filesystem::path>& output_dir = std::nullopt);

}  // namespace otbp
