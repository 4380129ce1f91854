#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "config.hpp"
#include "csv.hpp"
#include "manifest.hpp"
#include "scenarios.hpp"
#include "pmrlhf/errors.hpp"

namespace fs = std::filesystem;
using namespace pmlab;

namespace {

const fs::path kExamples = fs::path(PMLAB_DOCS_DIR) / "examples";

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("pmlab_test_" + tag + "_" +
                                           std::to_string(std::rand()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PMLAB_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors) {
    if (e.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("double formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.125}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("csv writer and reader round-trip") {
  CsvWriter w({"name", "value", "flag"});
  w.cell("plain").cell(0.25).cell(true).end_row();
  w.cell("with, comma \"quoted\"").cell(std::uint64_t{7}).cell(false).end_row();
  w.cell(std::string("multi\nline")).cell(-1e-9).cell("PASS").end_row();
  CHECK(w.rows() == 3);
  const auto t = parse_csv(w.text());
  REQUIRE(t.rows.size() == 3);
  CHECK(t.header == std::vector<std::string>{"name", "value", "flag"});
  CHECK(t.rows[1][t.column("name")] == "with, comma \"quoted\"");
  CHECK(t.rows[2][0] == "multi\nline");
  CHECK(t.rows[2][2] == "PASS");
  CHECK(std::stod(t.rows[2][1]) == -1e-9);
  CHECK(t.rows[0][2] == "true");
  CHECK_THROWS(t.column("missing"));
  CHECK(w.text().find('\r') == std::string::npos);
}

TEST_CASE("sha-256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("shipped example configs are valid") {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(kExamples)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const auto errors = validate_config(load_json(entry.path()));
    CHECK_MESSAGE(errors.empty(), entry.path().filename().string());
    CHECK_NOTHROW(parse_config(load_json(entry.path())));
  }
  CHECK(seen == scenario_names().size());
}

TEST_CASE("validation reports every error with its path") {
  const Json doc = Json::parse(R"({
    "scenario": "bias_curve",
    "seed": 1,
    "beta_grid": [1, -0.5],
    "p_ref_grid": [0.5, 1.5],
    "bogus": true
  })");
  const auto errors = validate_config(doc);
  CHECK(errors.size() >= 3);
  CHECK(mentions(errors, "beta_grid[1]"));
  CHECK(mentions(errors, "p_ref_grid[1]"));
  CHECK(mentions(errors, "bogus"));
  try {
    parse_config(doc);
    FAIL("expected an error");
  } catch (const pmrlhf::ConfigError& e) {
    CHECK(std::string(e.what()).find("beta_grid[1]") != std::string::npos);
  }
}

TEST_CASE("unknown tags list the allowed values") {
  const auto scenario = validate_config(Json::parse(R"({"scenario": "nope", "seed": 1})"));
  CHECK(mentions(scenario, "bias_curve"));
  CHECK(mentions(scenario, "align_compare"));
  const auto reg = validate_config(Json::parse(R"({
    "scenario": "pm_property", "seed": 1,
    "model": {"rewards": [[0, 1]], "reference": [[0.5, 0.5]]},
    "regularizers": [{"type": "tsallis"}],
    "beta_grid": [1]
  })"));
  CHECK(mentions(reg, "regularizers[0].type"));
  CHECK(mentions(reg, "conditional_pm"));
}

TEST_CASE("missing fields and wrong types are reported") {
  CHECK(mentions(validate_config(Json::parse(R"({"seed": 1})")), "scenario"));
  CHECK(mentions(validate_config(Json::parse(R"({"scenario": "ode_check", "seed": "x"})")), "seed"));
  CHECK(mentions(validate_config(Json::parse(R"({"scenario": "pm_property", "seed": 1,
      "regularizers": [{"type": "kl"}], "beta_grid": [1]})")),
                 "model"));
}

TEST_CASE("runs are deterministic and independent of the job count") {
  for (const char* name : {"bias_curve.json", "duality_check.json", "pm_property.json"}) {
    const auto cfg = parse_config(load_json(kExamples / name));
    const auto a = run_scenario(cfg, {1, false});
    const auto b = run_scenario(cfg, {4, false});
    CHECK_MESSAGE(a.outputs.files() == b.outputs.files(), name);
  }
}

TEST_CASE("pm property verdicts are written") {
  const auto res = run_scenario(parse_config(load_json(kExamples / "pm_property.json")), {});
  std::string csv;
  for (const auto& [file, content] : res.outputs.files()) {
    if (file == "pm_property.csv") csv = content;
  }
  const auto t = parse_csv(csv);
  REQUIRE(t.rows.size() == 3);
  const auto reg = t.column("regularizer"), verdict = t.column("verdict");
  for (const auto& row : t.rows) {
    CHECK(row[verdict] == (row[reg] == "kl" ? "FAIL" : "PASS"));
  }
}

TEST_CASE("run directory carries a verifiable manifest") {
  TempDir dir("manifest");
  const auto cfg = parse_config(load_json(kExamples / "bias_curve.json"));
  const auto manifest = run_to_directory(cfg, {1, true}, dir.path());
  CHECK(fs::exists(dir.path() / "manifest.json"));
  CHECK(fs::exists(dir.path() / "config.json"));
  CHECK(manifest.seed == 1);
  CHECK(manifest.config_sha256 == sha256_hex(canonical_config(cfg)));
  for (const auto& [file, sum] : manifest.checksums) {
    CHECK(sha256_file(dir.path() / file) == sum);
  }
  CHECK_NOTHROW(verify_manifest(dir.path(), manifest));
  const auto manifest_json = Json::parse(slurp(dir.path() / "manifest.json"));
  CHECK(manifest_json.at("tool_version") == kToolVersion);
  write_text(dir.path() / "bias_curve.csv", "tampered\n");
  CHECK_THROWS(verify_manifest(dir.path(), manifest));
}

TEST_CASE("seed override changes the canonical hash") {
  auto doc = load_json(kExamples / "duality_check.json");
  const auto a = parse_config(doc);
  doc["seed"] = 12;
  const auto b = parse_config(doc);
  CHECK(canonical_config(a) != canonical_config(b));
  doc["output_dir"] = "/somewhere/else";
  CHECK(canonical_config(parse_config(doc)) == canonical_config(b));
}

TEST_CASE("command-line exit codes") {
  TempDir dir("exit");
  const std::string cfg = (kExamples / "ode_check.json").string();
  CHECK(run_cli("validate --config " + cfg) == 0);
  CHECK(run_cli("run --config " + cfg + " --out " + (dir.path() / "ok").string()) == 0);
  CHECK(fs::exists(dir.path() / "ok" / "manifest.json"));

  const auto bad = dir.path() / "bad.json";
  write_text(bad, R"({"scenario": "bias_curve", "seed": 1, "beta_grid": [0]})");
  CHECK(run_cli("validate --config " + bad.string()) == 2);
  CHECK(run_cli("run --config " + bad.string() + " --out " + dir.path().string()) == 2);
  write_text(dir.path() / "broken.json", "{not json");
  CHECK(run_cli("validate --config " + (dir.path() / "broken.json").string()) == 2);
  CHECK(run_cli("validate --config " + (dir.path() / "absent.json").string()) == 2);
  CHECK(run_cli("run --config " + cfg) == 2);  // no output directory anywhere
  CHECK(run_cli("run --config " + cfg + " --out x --jobs 0") == 2);
  CHECK(run_cli("frobnicate") == 2);

  // A regular-set threshold above every reference probability is only
  // discovered while running and still counts as a configuration error.
  const auto empty_set = dir.path() / "empty_set.json";
  auto doc = load_json(kExamples / "align_compare.json");
  doc["alpha_grid"] = Json::array({0.99});
  doc["scenarios"] = 1;
  write_text(empty_set, doc.dump());
  CHECK(run_cli("run --config " + empty_set.string() + " --out " +
                (dir.path() / "empty").string()) == 2);

  write_text(dir.path() / "blocker", "file");
  CHECK(run_cli("run --config " + cfg + " --out " + (dir.path() / "blocker" / "sub").string()) ==
        1);
}

}  // TEST_SUITE
