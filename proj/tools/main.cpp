// pmlab: scenario runner for the preference-matching laboratory.
//
//   pmlab validate --config scenario.json
//   pmlab run --config scenario.json --out results/ [--seed N] [--jobs N] [--svg]
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "config.hpp"
#include "scenarios.hpp"
#include "pmrlhf/errors.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kInvalidConfig = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool svg = false;
};

int report_errors(const std::string& path, const std::vector<std::string>& errors) {
  std::cerr << path << ": " << errors.size() << " error" << (errors.size() == 1 ? "" : "s")
            << "\n";
  for (const auto& e : errors) std::cerr << "  " << e << "\n";
  return kInvalidConfig;
}

int do_validate(const Options& opt) {
  pmlab::Json doc;
  try {
    doc = pmlab::load_json(opt.config);
  } catch (const pmrlhf::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kInvalidConfig;
  }
  if (opt.seed) doc["seed"] = *opt.seed;
  const auto errors = pmlab::validate_config(doc);
  if (!errors.empty()) return report_errors(opt.config, errors);
  std::cout << opt.config << ": valid (" << doc.at("scenario").get<std::string>() << ")\n";
  return kOk;
}

int do_run(const Options& opt) {
  pmlab::ScenarioConfig config;
  try {
    pmlab::Json doc = pmlab::load_json(opt.config);
    if (opt.seed) doc["seed"] = *opt.seed;
    const auto errors = pmlab::validate_config(doc);
    if (!errors.empty()) return report_errors(opt.config, errors);
    config = pmlab::parse_config(doc);
  } catch (const pmrlhf::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kInvalidConfig;
  }
  const std::string out = !opt.out.empty() ? opt.out : config.output_dir;
  if (out.empty()) {
    std::cerr << "output_dir: missing (set it in the config or pass --out)\n";
    return kInvalidConfig;
  }
  if (opt.jobs == 0) {
    std::cerr << "--jobs: must be >= 1\n";
    return kInvalidConfig;
  }

  const char* scenario = pmlab::scenario_name(config.kind);
  try {
    const auto manifest = pmlab::run_to_directory(config, {opt.jobs, opt.svg}, out);
    std::cout << scenario << ": wrote " << manifest.checksums.size() << " files to " << out
              << "\n";
    for (const auto& [kind, count] : manifest.warnings) {
      std::cout << "  warning: " << kind << " = " << count << "\n";
    }
    return kOk;
  } catch (const pmrlhf::ConfigError& e) {
    std::cerr << scenario << ": " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << scenario << ": run failed: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-matching RLHF laboratory"};
  app.require_subcommand(1);
  Options opt;

  auto* run = app.add_subcommand("run", "Execute a scenario and write its outputs");
  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  for (auto* sub : {run, validate}) {
    sub->add_option("--config", opt.config, "Scenario JSON file")->required();
    sub->add_option("--seed", opt.seed, "Override the root seed");
  }
  run->add_option("--out", opt.out, "Output directory (overrides output_dir)");
  run->add_option("--jobs", opt.jobs, "Worker threads")->capture_default_str();
  run->add_flag("--svg", opt.svg, "Also render SVG charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }
  return run->parsed() ? do_run(opt) : do_validate(opt);
}
