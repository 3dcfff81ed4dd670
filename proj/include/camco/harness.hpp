#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "camco/optimize.hpp"
#include "camco/scenario.hpp"
#include "camco/serialize.hpp"

namespace camco {

struct RunSpec {
  Method method = Method::JointDfgrad;
  ScenarioConfig scenario = scenario_preset("calibrated");
  std::uint64_t seed = 0;
  std::filesystem::path out;
  bool fast = false;
  std::optional<std::filesystem::path> catalogue_path;
  std::optional<std::string> expected_catalogue_hash;  ///< checked when set (manifest replays)
  JointConfig config{};
  bool write_history = true;
  bool write_checkpoints = true;
};

/// Full schedule (10 × 35 × 45) or the reduced `--fast` profile (6 × 12 × 30).
JointConfig default_joint_config(bool fast);

/// Builds a spec from a run manifest; the output directory is left empty.
RunSpec spec_from_manifest(const Json& manifest);

struct RunOutcome {
  JointResult result;
  Json manifest;
  Json summary;
};

/// Executes a spec and writes manifest.json, history.csv, summary.json,
/// fitness_series.csv, candidates.csv and checkpoints/gen_XX.{bin,json}.
RunOutcome run(const RunSpec& spec);

/// Markdown table over completed run directories. All runs must share a
/// scenario (ConfigError otherwise); the best value of each metric column is
/// marked with '*'. When csv_out is set the same rows are written there.
std::string compare(const std::vector<std::filesystem::path>& run_dirs,
                    const std::optional<std::filesystem::path>& csv_out = std::nullopt);

}  // namespace camco
