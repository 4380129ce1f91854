#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "manifest.hpp"

namespace pmlab {

struct RunOptions {
  std::size_t jobs = 1;
  bool svg = false;
};

struct ScenarioResult {
  OutputSet outputs;
  std::map<std::string, std::uint64_t> warnings;
  std::map<std::string, double> timings_ms;
};

// One (scenario, regularizer, beta, alpha, epsilon) cell of align_compare.
struct AlignCell {
  std::size_t scenario = 0;
  std::string regularizer;
  double beta = 1.0;
  std::optional<double> alpha;
  std::optional<double> epsilon;  // constant-epsilon rule only
  pmrlhf::MetricsReport metrics;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t clamped = 0;
  std::vector<pmrlhf::TrajectoryPoint> trajectory;

  std::string id() const;
};

std::vector<AlignCell> align_compare_cells(const ScenarioConfig& config, std::size_t jobs);

// Runs the scenario in memory. pmrlhf::ConfigError signals a configuration
// problem discovered while running (for example an empty regular set).
ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options);

// Runs, writes every output under out_dir, then the manifest.
RunManifest run_to_directory(const ScenarioConfig& config, const RunOptions& options,
                             const std::filesystem::path& out_dir);

// Flat JSON object and one-row CSV for a metrics report.
std::string metrics_json(const pmrlhf::MetricsReport& report);
std::string metrics_csv(const pmrlhf::MetricsReport& report);

}  // namespace pmlab
