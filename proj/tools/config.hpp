#pragma once

// JSON scenario description. docs/scenario_schema.md lists every field.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmrlhf/metrics.hpp"
#include "pmrlhf/optimizer.hpp"
#include "pmrlhf/reward_learning.hpp"

namespace pmlab {

using Json = nlohmann::json;

enum class ScenarioKind {
  kBiasCurve,
  kOdeCheck,
  kDualityCheck,
  kRewardFit,
  kCollapse,
  kAlignCompare,
  kPmProperty,
};

const char* scenario_name(ScenarioKind kind);
const std::vector<std::string>& scenario_names();

struct RegularizerEntry {
  std::string type;                 // one of pmrlhf::regularizer_tags()
  double c1 = 0.0;                  // pm, conditional_pm
  double c2 = 0.0;                  // pm, conditional_pm
  bool mean_zero = false;           // pm: C1 = -E_ref[r]
  bool epsilon_constant = false;    // conditional_pm: sweep epsilon_grid
  std::string f = "kl";             // fdiv generator name
};

struct TabularModel {
  std::vector<std::vector<double>> rewards;
  std::optional<std::vector<std::vector<double>>> reference;
};

struct SequenceModel {
  std::size_t vocab_size = 4;
  std::size_t max_length = 3;
  std::size_t markov_order = 1;
  std::size_t prompts = 1;
  double reference_scale = 1.0;
  double reward_scale = 1.0;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kBiasCurve;
  std::uint64_t seed = 0;
  std::string output_dir;

  std::optional<TabularModel> tabular;
  std::optional<SequenceModel> sequence;
  std::vector<RegularizerEntry> regularizers;

  std::vector<double> beta_grid;
  std::vector<double> alpha_grid;
  std::vector<double> epsilon_grid;
  std::vector<double> p_ref_grid;
  std::size_t p_reward_points = 101;

  std::vector<double> coefficient_grid{-1.0, 0.0, 1.0};
  std::string derivatives = "automatic";

  std::size_t rows = 50;
  std::size_t max_k = 20;

  std::size_t comparisons = 100'000;
  std::size_t scenarios = 1;  // align_compare: independent random scenarios

  std::vector<std::size_t> length_grid;
  std::size_t pairs = 10'000;
  std::size_t repeats = 1;

  pmrlhf::OptimizerConfig optimizer;
  pmrlhf::MetricSamplerConfig metrics;
  pmrlhf::RewardFitConfig fit;

  Json source;  // document as read, with the effective seed
};

// Every schema violation, each prefixed by its field path.
std::vector<std::string> validate_config(const Json& doc);

// Throws pmrlhf::ConfigError listing all violations.
ScenarioConfig parse_config(const Json& doc);

// Throws pmrlhf::ConfigError when the file is unreadable or not JSON.
Json load_json(const std::filesystem::path& path);

// Canonical serialization used for hashing (keys sorted, output_dir dropped).
std::string canonical_config(const ScenarioConfig& config);

}  // namespace pmlab
