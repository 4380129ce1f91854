#include "config.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/regularizers.hpp"

namespace pmlab {
namespace {

constexpr ScenarioKind kKinds[] = {
    ScenarioKind::kBiasCurve,   ScenarioKind::kOdeCheck,     ScenarioKind::kDualityCheck,
    ScenarioKind::kRewardFit,   ScenarioKind::kCollapse,     ScenarioKind::kAlignCompare,
    ScenarioKind::kPmProperty,
};

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& message) {
    errors_.push_back(path + ": " + message);
  }

  void check_keys(const Json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (!allowed.count(key)) error(join_path(path, key), "unknown field");
    }
  }

  static std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
  }

  bool number(const Json& obj, const std::string& key, const std::string& path,
              double& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      error(path, "expected a finite number");
      return false;
    }
    out = v.get<double>();
    return true;
  }

  bool count(const Json& obj, const std::string& key, const std::string& path,
             std::size_t& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      error(path, "expected a nonnegative integer");
      return false;
    }
    out = v.get<std::size_t>();
    return true;
  }

  bool string(const Json& obj, const std::string& key, const std::string& path,
              std::string& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj.at(key);
    if (!v.is_string()) {
      error(path, "expected a string");
      return false;
    }
    out = v.get<std::string>();
    return true;
  }

  bool boolean(const Json& obj, const std::string& key, const std::string& path,
               bool& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj.at(key);
    if (!v.is_boolean()) {
      error(path, "expected true or false");
      return false;
    }
    out = v.get<bool>();
    return true;
  }

  bool number_list(const Json& obj, const std::string& key, const std::string& path,
                   std::vector<double>& out) {
    if (!obj.contains(key)) return false;
    return numbers(obj.at(key), path, out);
  }

  bool numbers(const Json& v, const std::string& path, std::vector<double>& out) {
    if (!v.is_array()) {
      error(path, "expected an array of numbers");
      return false;
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        error(path + "[" + std::to_string(i) + "]", "expected a finite number");
        continue;
      }
      out.push_back(v[i].get<double>());
    }
    return true;
  }

  bool matrix(const Json& obj, const std::string& key, const std::string& path,
              std::vector<std::vector<double>>& out) {
    if (!obj.contains(key)) return false;
    const Json& v = obj.at(key);
    if (!v.is_array() || v.empty()) {
      error(path, "expected a nonempty array of rows");
      return false;
    }
    out.assign(v.size(), {});
    for (std::size_t i = 0; i < v.size(); ++i) {
      numbers(v[i], path + "[" + std::to_string(i) + "]", out[i]);
    }
    return true;
  }

 private:
  std::vector<std::string>& errors_;
};

void require_nonempty(Reader& rd, const std::vector<double>& grid, const std::string& path) {
  if (grid.empty()) rd.error(path, "must be a nonempty array");
}

void require_range(Reader& rd, const std::vector<double>& grid, const std::string& path,
                   double lo, double hi, bool open_lo) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid[i];
    if (v > hi || v < lo || (open_lo && v == lo)) {
      rd.error(path + "[" + std::to_string(i) + "]",
               "must lie in " + std::string(open_lo ? "(" : "[") + format_double(lo) + ", " +
                   format_double(hi) + "]");
    }
  }
}

void require_positive(Reader& rd, const std::vector<double>& grid, const std::string& path) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) rd.error(path + "[" + std::to_string(i) + "]", "must be > 0");
  }
}

void read_optimizer(Reader& rd, const Json& doc, pmrlhf::OptimizerConfig& out) {
  if (!doc.contains("optimizer")) return;
  const Json& o = doc.at("optimizer");
  if (!o.is_object()) return rd.error("optimizer", "expected an object");
  rd.check_keys(o, "optimizer",
                {"step_size", "max_iterations", "tolerance", "initialization", "direction",
                 "record_stride"});
  if (rd.number(o, "step_size", "optimizer.step_size", out.step_size) &&
      !(out.step_size > 0.0)) {
    rd.error("optimizer.step_size", "must be > 0");
  }
  if (rd.count(o, "max_iterations", "optimizer.max_iterations", out.max_iterations) &&
      out.max_iterations == 0) {
    rd.error("optimizer.max_iterations", "must be positive");
  }
  if (rd.number(o, "tolerance", "optimizer.tolerance", out.gradient_tolerance) &&
      !(out.gradient_tolerance > 0.0)) {
    rd.error("optimizer.tolerance", "must be > 0");
  }
  std::string s;
  if (rd.string(o, "initialization", "optimizer.initialization", s)) {
    if (s == "zero") out.initialization = pmrlhf::Initialization::kZero;
    else if (s == "reference") out.initialization = pmrlhf::Initialization::kReference;
    else rd.error("optimizer.initialization", "unknown value '" + s + "' (allowed: zero, reference)");
  }
  if (rd.string(o, "direction", "optimizer.direction", s)) {
    if (s == "natural") out.direction = pmrlhf::AscentDirection::kNatural;
    else if (s == "euclidean") out.direction = pmrlhf::AscentDirection::kEuclidean;
    else rd.error("optimizer.direction", "unknown value '" + s + "' (allowed: natural, euclidean)");
  }
  rd.count(o, "record_stride", "optimizer.record_stride", out.record_stride);
}

void read_metrics(Reader& rd, const Json& doc, pmrlhf::MetricSamplerConfig& out) {
  if (!doc.contains("metrics")) return;
  const Json& m = doc.at("metrics");
  if (!m.is_object()) return rd.error("metrics", "expected an object");
  rd.check_keys(m, "metrics", {"mode", "pairs", "responses"});
  std::string s;
  if (rd.string(m, "mode", "metrics.mode", s)) {
    if (s == "exact") out.mode = pmrlhf::SamplingMode::kExact;
    else if (s == "monte_carlo") out.mode = pmrlhf::SamplingMode::kMonteCarlo;
    else rd.error("metrics.mode", "unknown value '" + s + "' (allowed: exact, monte_carlo)");
  }
  if (rd.count(m, "pairs", "metrics.pairs", out.pairs) && out.pairs == 0) {
    rd.error("metrics.pairs", "must be positive");
  }
  if (rd.count(m, "responses", "metrics.responses", out.responses) && out.responses == 0) {
    rd.error("metrics.responses", "must be positive");
  }
}

void read_fit(Reader& rd, const Json& doc, pmrlhf::RewardFitConfig& out) {
  if (!doc.contains("fit")) return;
  const Json& f = doc.at("fit");
  if (!f.is_object()) return rd.error("fit", "expected an object");
  rd.check_keys(f, "fit", {"step_size", "max_iterations", "tolerance", "normalization"});
  if (rd.number(f, "step_size", "fit.step_size", out.step_size) && !(out.step_size > 0.0)) {
    rd.error("fit.step_size", "must be > 0");
  }
  rd.count(f, "max_iterations", "fit.max_iterations", out.max_iterations);
  if (rd.number(f, "tolerance", "fit.tolerance", out.gradient_tolerance) &&
      !(out.gradient_tolerance > 0.0)) {
    rd.error("fit.tolerance", "must be > 0");
  }
  std::string s;
  if (rd.string(f, "normalization", "fit.normalization", s)) {
    if (s == "first_response_zero") out.normalization = pmrlhf::Normalization::kFirstResponseZero;
    else if (s == "row_mean_zero") out.normalization = pmrlhf::Normalization::kRowMeanZero;
    else rd.error("fit.normalization", "unknown value '" + s +
                                           "' (allowed: first_response_zero, row_mean_zero)");
  }
}

void read_regularizers(Reader& rd, const Json& doc, std::vector<RegularizerEntry>& out) {
  if (!doc.contains("regularizers")) return;
  const Json& list = doc.at("regularizers");
  if (!list.is_array()) return rd.error("regularizers", "expected an array");
  const auto tags = pmrlhf::regularizer_tags();
  const auto f_names = pmrlhf::FDivergenceSpec::known_names();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "regularizers[" + std::to_string(i) + "]";
    const Json& e = list[i];
    if (!e.is_object()) {
      rd.error(path, "expected an object");
      continue;
    }
    rd.check_keys(e, path, {"type", "c1", "c2", "mean_zero", "epsilon", "f"});
    RegularizerEntry entry;
    if (!rd.string(e, "type", path + ".type", entry.type)) {
      if (!e.contains("type")) rd.error(path + ".type", "missing (allowed: " + join(tags) + ")");
      continue;
    }
    if (std::find(tags.begin(), tags.end(), entry.type) == tags.end()) {
      rd.error(path + ".type",
               "unknown regularizer '" + entry.type + "' (allowed: " + join(tags) + ")");
      continue;
    }
    const bool has_constants = entry.type == "pm" || entry.type == "conditional_pm";
    for (const char* key : {"c1", "c2"}) {
      if (e.contains(key) && !has_constants) {
        rd.error(path + "." + key, "only valid for pm and conditional_pm");
      }
    }
    rd.number(e, "c1", path + ".c1", entry.c1);
    rd.number(e, "c2", path + ".c2", entry.c2);
    if (e.contains("mean_zero") && entry.type != "pm") {
      rd.error(path + ".mean_zero", "only valid for pm");
    }
    rd.boolean(e, "mean_zero", path + ".mean_zero", entry.mean_zero);
    if (e.contains("epsilon")) {
      std::string eps;
      if (entry.type != "conditional_pm") {
        rd.error(path + ".epsilon", "only valid for conditional_pm");
      } else if (rd.string(e, "epsilon", path + ".epsilon", eps)) {
        if (eps == "constant") entry.epsilon_constant = true;
        else if (eps != "reference") {
          rd.error(path + ".epsilon", "unknown rule '" + eps + "' (allowed: reference, constant)");
        }
      }
    }
    if (e.contains("f")) {
      if (entry.type != "fdiv") {
        rd.error(path + ".f", "only valid for fdiv");
      } else if (rd.string(e, "f", path + ".f", entry.f) &&
                 std::find(f_names.begin(), f_names.end(), entry.f) == f_names.end()) {
        rd.error(path + ".f", "unknown generator '" + entry.f + "' (allowed: " +
                                  join(f_names) + ")");
      }
    }
    out.push_back(std::move(entry));
  }
}

void check_rows(Reader& rd, const std::vector<std::vector<double>>& rows,
                const std::string& path) {
  for (std::size_t x = 0; x < rows.size(); ++x) {
    if (rows[x].size() < 2) {
      rd.error(path + "[" + std::to_string(x) + "]", "needs at least 2 responses");
    }
  }
}

void read_model(Reader& rd, const Json& doc, ScenarioConfig& cfg, bool want_sequence) {
  if (!doc.contains("model")) {
    rd.error("model", want_sequence ? "missing (sequence model required)"
                                    : "missing (tabular rewards required)");
    return;
  }
  const Json& m = doc.at("model");
  if (!m.is_object()) return rd.error("model", "expected an object");
  if (want_sequence) {
    rd.check_keys(m, "model",
                  {"vocab_size", "max_length", "markov_order", "prompts", "reference_scale",
                   "reward_scale"});
    SequenceModel s;
    rd.count(m, "vocab_size", "model.vocab_size", s.vocab_size);
    rd.count(m, "max_length", "model.max_length", s.max_length);
    rd.count(m, "markov_order", "model.markov_order", s.markov_order);
    rd.count(m, "prompts", "model.prompts", s.prompts);
    rd.number(m, "reference_scale", "model.reference_scale", s.reference_scale);
    rd.number(m, "reward_scale", "model.reward_scale", s.reward_scale);
    if (s.vocab_size < 2) rd.error("model.vocab_size", "must be >= 2");
    if (s.max_length < 1) rd.error("model.max_length", "must be >= 1");
    if (s.prompts < 1) rd.error("model.prompts", "must be >= 1");
    if (s.reference_scale < 0.0) rd.error("model.reference_scale", "must be >= 0");
    if (s.reward_scale < 0.0) rd.error("model.reward_scale", "must be >= 0");
    if (s.vocab_size >= 2 && s.max_length >= 1) {
      try {
        pmrlhf::Vocabulary{s.vocab_size, s.max_length}.validate();
      } catch (const pmrlhf::Error& e) {
        rd.error("model", e.what());
      }
    }
    cfg.sequence = s;
    return;
  }
  rd.check_keys(m, "model", {"rewards", "reference"});
  TabularModel t;
  if (!rd.matrix(m, "rewards", "model.rewards", t.rewards)) {
    if (!m.contains("rewards")) rd.error("model.rewards", "missing");
  }
  check_rows(rd, t.rewards, "model.rewards");
  std::vector<std::vector<double>> ref;
  if (rd.matrix(m, "reference", "model.reference", ref)) {
    if (ref.size() != t.rewards.size()) {
      rd.error("model.reference", "needs one row per reward row");
    }
    for (std::size_t x = 0; x < ref.size() && x < t.rewards.size(); ++x) {
      const std::string p = "model.reference[" + std::to_string(x) + "]";
      if (ref[x].size() != t.rewards[x].size()) {
        rd.error(p, "length differs from the reward row");
        continue;
      }
      long double sum = 0.0L;
      bool negative = false;
      for (double v : ref[x]) {
        sum += v;
        negative = negative || v < 0.0;
      }
      if (negative) rd.error(p, "entries must be >= 0");
      if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-12) rd.error(p, "must sum to 1");
    }
    t.reference = std::move(ref);
  }
  cfg.tabular = std::move(t);
}

bool uses(const std::vector<RegularizerEntry>& regs, const std::string& type) {
  return std::any_of(regs.begin(), regs.end(),
                     [&](const RegularizerEntry& e) { return e.type == type; });
}

void read_document(Reader& rd, const Json& doc, ScenarioConfig& cfg) {
  if (!doc.is_object()) {
    rd.error("(root)", "expected a JSON object");
    return;
  }
  rd.check_keys(doc, "",
                {"scenario", "seed", "output_dir", "model", "regularizers", "beta_grid",
                 "alpha_grid", "epsilon_grid", "p_ref_grid", "p_reward_points",
                 "coefficient_grid", "derivatives", "rows", "max_k", "comparisons",
                 "scenarios", "length_grid", "pairs", "repeats", "optimizer", "metrics",
                 "fit"});

  std::string kind;
  bool kind_ok = false;
  if (rd.string(doc, "scenario", "scenario", kind)) {
    for (ScenarioKind k : kKinds) {
      if (kind == scenario_name(k)) {
        cfg.kind = k;
        kind_ok = true;
      }
    }
    if (!kind_ok) {
      rd.error("scenario", "unknown scenario '" + kind + "' (allowed: " +
                               join(scenario_names()) + ")");
    }
  } else if (!doc.contains("scenario")) {
    rd.error("scenario", "missing (allowed: " + join(scenario_names()) + ")");
  }

  if (!doc.contains("seed")) {
    rd.error("seed", "missing");
  } else if (!doc.at("seed").is_number_unsigned() &&
             !(doc.at("seed").is_number_integer() && doc.at("seed").get<std::int64_t>() >= 0)) {
    rd.error("seed", "expected an unsigned 64-bit integer");
  } else {
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  rd.string(doc, "output_dir", "output_dir", cfg.output_dir);

  read_regularizers(rd, doc, cfg.regularizers);
  read_optimizer(rd, doc, cfg.optimizer);
  read_metrics(rd, doc, cfg.metrics);
  read_fit(rd, doc, cfg.fit);

  rd.number_list(doc, "beta_grid", "beta_grid", cfg.beta_grid);
  rd.number_list(doc, "alpha_grid", "alpha_grid", cfg.alpha_grid);
  rd.number_list(doc, "epsilon_grid", "epsilon_grid", cfg.epsilon_grid);
  rd.number_list(doc, "p_ref_grid", "p_ref_grid", cfg.p_ref_grid);
  rd.number_list(doc, "coefficient_grid", "coefficient_grid", cfg.coefficient_grid);
  rd.count(doc, "p_reward_points", "p_reward_points", cfg.p_reward_points);
  rd.string(doc, "derivatives", "derivatives", cfg.derivatives);
  rd.count(doc, "rows", "rows", cfg.rows);
  rd.count(doc, "max_k", "max_k", cfg.max_k);
  rd.count(doc, "comparisons", "comparisons", cfg.comparisons);
  rd.count(doc, "scenarios", "scenarios", cfg.scenarios);
  rd.count(doc, "pairs", "pairs", cfg.pairs);
  rd.count(doc, "repeats", "repeats", cfg.repeats);
  if (doc.contains("length_grid")) {
    const Json& g = doc.at("length_grid");
    if (!g.is_array()) {
      rd.error("length_grid", "expected an array of integers");
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].is_number_unsigned() || g[i].get<std::size_t>() < 1) {
          rd.error("length_grid[" + std::to_string(i) + "]", "expected an integer >= 1");
          continue;
        }
        cfg.length_grid.push_back(g[i].get<std::size_t>());
      }
    }
  }

  if (!kind_ok) return;
  switch (cfg.kind) {
    case ScenarioKind::kBiasCurve:
      require_nonempty(rd, cfg.beta_grid, "beta_grid");
      require_positive(rd, cfg.beta_grid, "beta_grid");
      require_nonempty(rd, cfg.p_ref_grid, "p_ref_grid");
      require_range(rd, cfg.p_ref_grid, "p_ref_grid", 0.0, 1.0, false);
      if (cfg.p_reward_points < 2) rd.error("p_reward_points", "must be >= 2");
      break;
    case ScenarioKind::kOdeCheck:
      require_nonempty(rd, cfg.coefficient_grid, "coefficient_grid");
      if (cfg.derivatives != "automatic" && cfg.derivatives != "central_difference") {
        rd.error("derivatives", "unknown mode '" + cfg.derivatives +
                                    "' (allowed: automatic, central_difference)");
      }
      break;
    case ScenarioKind::kDualityCheck:
      if (cfg.rows < 1) rd.error("rows", "must be >= 1");
      if (cfg.max_k < 2) rd.error("max_k", "must be >= 2");
      break;
    case ScenarioKind::kRewardFit:
      read_model(rd, doc, cfg, false);
      if (cfg.comparisons < 1) rd.error("comparisons", "must be >= 1");
      break;
    case ScenarioKind::kCollapse:
      read_model(rd, doc, cfg, true);
      if (cfg.length_grid.empty()) rd.error("length_grid", "must be a nonempty array");
      if (cfg.pairs < 1) rd.error("pairs", "must be >= 1");
      if (cfg.repeats < 1) rd.error("repeats", "must be >= 1");
      if (cfg.sequence) {
        for (std::size_t i = 0; i < cfg.length_grid.size(); ++i) {
          try {
            pmrlhf::Vocabulary{cfg.sequence->vocab_size, cfg.length_grid[i]}.validate();
          } catch (const pmrlhf::Error& e) {
            rd.error("length_grid[" + std::to_string(i) + "]", e.what());
          }
        }
      }
      break;
    case ScenarioKind::kAlignCompare:
      read_model(rd, doc, cfg, true);
      if (cfg.regularizers.empty()) rd.error("regularizers", "must be a nonempty array");
      require_nonempty(rd, cfg.beta_grid, "beta_grid");
      require_positive(rd, cfg.beta_grid, "beta_grid");
      if (uses(cfg.regularizers, "conditional_pm")) {
        require_nonempty(rd, cfg.alpha_grid, "alpha_grid");
        require_range(rd, cfg.alpha_grid, "alpha_grid", 0.0, 1.0, false);
        const bool constant = std::any_of(
            cfg.regularizers.begin(), cfg.regularizers.end(),
            [](const RegularizerEntry& e) { return e.epsilon_constant; });
        if (constant) {
          require_nonempty(rd, cfg.epsilon_grid, "epsilon_grid");
          require_positive(rd, cfg.epsilon_grid, "epsilon_grid");
        }
      }
      if (cfg.scenarios < 1) rd.error("scenarios", "must be >= 1");
      break;
    case ScenarioKind::kPmProperty:
      read_model(rd, doc, cfg, false);
      if (cfg.regularizers.empty()) rd.error("regularizers", "must be a nonempty array");
      if (uses(cfg.regularizers, "kl") || uses(cfg.regularizers, "fdiv")) {
        require_nonempty(rd, cfg.beta_grid, "beta_grid");
        require_positive(rd, cfg.beta_grid, "beta_grid");
      }
      if (uses(cfg.regularizers, "conditional_pm")) {
        require_nonempty(rd, cfg.alpha_grid, "alpha_grid");
        require_range(rd, cfg.alpha_grid, "alpha_grid", 0.0, 1.0, false);
        if (std::any_of(cfg.regularizers.begin(), cfg.regularizers.end(),
                        [](const RegularizerEntry& e) { return e.epsilon_constant; })) {
          require_nonempty(rd, cfg.epsilon_grid, "epsilon_grid");
          require_positive(rd, cfg.epsilon_grid, "epsilon_grid");
        }
      }
      if (cfg.tabular && !cfg.tabular->reference) {
        for (std::size_t i = 0; i < cfg.regularizers.size(); ++i) {
          const auto& t = cfg.regularizers[i].type;
          if (t == "kl" || t == "fdiv" || t == "conditional_pm" || cfg.regularizers[i].mean_zero) {
            rd.error("model.reference", "required by regularizers[" + std::to_string(i) +
                                            "] (" + t + ")");
          }
        }
      }
      break;
  }
}

}  // namespace

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kBiasCurve: return "bias_curve";
    case ScenarioKind::kOdeCheck: return "ode_check";
    case ScenarioKind::kDualityCheck: return "duality_check";
    case ScenarioKind::kRewardFit: return "reward_fit";
    case ScenarioKind::kCollapse: return "collapse";
    case ScenarioKind::kAlignCompare: return "align_compare";
    case ScenarioKind::kPmProperty: return "pm_property";
  }
  return "unknown";
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (ScenarioKind k : kKinds) out.emplace_back(scenario_name(k));
    return out;
  }();
  return names;
}

std::vector<std::string> validate_config(const Json& doc) {
  std::vector<std::string> errors;
  Reader rd(errors);
  ScenarioConfig cfg;
  read_document(rd, doc, cfg);
  return errors;
}

ScenarioConfig parse_config(const Json& doc) {
  std::vector<std::string> errors;
  Reader rd(errors);
  ScenarioConfig cfg;
  read_document(rd, doc, cfg);
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw pmrlhf::ConfigError(msg);
  }
  cfg.source = doc;
  return cfg;
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw pmrlhf::ConfigError("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw pmrlhf::ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
}

std::string canonical_config(const ScenarioConfig& config) {
  Json doc = config.source;
  doc.erase("output_dir");
  doc["seed"] = config.seed;
  return doc.dump();
}

}  // namespace pmlab
