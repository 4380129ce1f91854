#include "scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "csv.hpp"
#include "svg.hpp"
#include "pmrlhf/closed_form.hpp"
#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"
#include "pmrlhf/parallel.hpp"
#include "pmrlhf/regularizers.hpp"
#include "pmrlhf/reward_learning.hpp"
#include "pmrlhf/rng.hpp"
#include "pmrlhf/sequence.hpp"

namespace pmlab {
namespace {

using namespace pmrlhf;
using Clock = std::chrono::steady_clock;

class Stopwatch {
 public:
  explicit Stopwatch(std::map<std::string, double>& sink) : sink_(sink) {}
  template <typename F>
  auto time(const std::string& stage, F&& body) {
    const auto start = Clock::now();
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      record(stage, start);
    } else {
      auto out = body();
      record(stage, start);
      return out;
    }
  }

 private:
  void record(const std::string& stage, Clock::time_point start) {
    sink_[stage] += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }
  std::map<std::string, double>& sink_;
};

std::string json_text(const nlohmann::ordered_json& doc) { return doc.dump(2) + "\n"; }

// Doubles go through the shortest round-trip form so JSON and CSV agree.
nlohmann::ordered_json num(double v) {
  if (!std::isfinite(v)) return format_double(v);
  return v;
}

std::string cell_or_empty(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

// ---------------------------------------------------------------- bias_curve

void bias_curve_scenario(const ScenarioConfig& cfg, const RunOptions& opt,
                         ScenarioResult& res) {
  std::vector<double> grid(cfg.p_reward_points);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  CsvWriter csv({"beta", "p_ref", "p_reward", "p_rlhf"});
  std::vector<Series> series;
  std::uint64_t undefined = 0;
  for (double beta : cfg.beta_grid) {
    for (double p_ref : cfg.p_ref_grid) {
      Series s{"beta=" + format_double(beta) + " p_ref=" + format_double(p_ref), {}, {}};
      for (double p : grid) {
        double value = std::nan("");
        try {
          value = bias_curve(beta, p_ref, {p}).front().p_rlhf;
        } catch (const UndefinedConditionalError&) {
          ++undefined;
        }
        csv.cell(beta).cell(p_ref).cell(p).cell(value).end_row();
        s.x.push_back(p);
        s.y.push_back(value);
      }
      series.push_back(std::move(s));
    }
  }
  res.outputs.add("bias_curve.csv", csv.text());
  if (undefined) res.warnings["undefined_conditional_points"] = undefined;
  if (opt.svg) {
    res.outputs.add("bias_curve.svg",
                    line_chart_svg(series, {"Aligned preference versus reward preference",
                                            "p_reward", "p_rlhf"}));
  }
}

// ----------------------------------------------------------------- ode_check

void ode_check_scenario(const ScenarioConfig& cfg, const RunOptions& opt,
                        ScenarioResult& res) {
  struct Candidate {
    std::string name;
    SmoothFunction fn;
    bool pm_form;
  };
  std::vector<Candidate> candidates;
  for (double a : cfg.coefficient_grid) {
    for (double b : cfg.coefficient_grid) {
      candidates.push_back({"pm[a=" + format_double(a) + ";b=" + format_double(b) + "]",
                            pm_family(a, b), true});
    }
  }
  candidates.push_back({"pi_squared", [](Jet p) { return p * p; }, false});
  candidates.push_back({"sqrt_pi", [](Jet p) { return sqrt(p); }, false});
  candidates.push_back({"neg_pi_log_pi", [](Jet p) { return Jet(0.0) - p * log(p); }, false});

  const DerivativeMode mode = cfg.derivatives == "central_difference"
                                  ? DerivativeMode::kCentralDifference
                                  : DerivativeMode::kAutomatic;
  CsvWriter csv({"function", "pi", "residual"});
  nlohmann::ordered_json summary;
  summary["derivatives"] = cfg.derivatives;
  summary["tolerance"] = 1e-8;
  summary["functions"] = nlohmann::ordered_json::array();
  std::vector<Series> series;
  for (const auto& c : candidates) {
    double worst = 0.0;
    Series s{c.name, {}, {}};
    for (int i = 1; i <= 99; ++i) {
      const double pi = i / 100.0;
      const double r = pm_ode_residual(c.fn, pi, mode);
      worst = std::max(worst, std::fabs(r));
      csv.cell(c.name).cell(pi).cell(r).end_row();
      s.x.push_back(pi);
      s.y.push_back(r);
    }
    nlohmann::ordered_json entry;
    entry["function"] = c.name;
    entry["pm_form"] = c.pm_form;
    entry["max_abs_residual"] = num(worst);
    entry["solves_ode"] = worst <= 1e-8;
    summary["functions"].push_back(entry);
    if (!c.pm_form) series.push_back(std::move(s));
  }
  res.outputs.add("ode_residuals.csv", csv.text());
  res.outputs.add("ode_summary.json", json_text(summary));
  if (opt.svg) {
    res.outputs.add("ode_residuals.svg",
                    line_chart_svg(series, {"ODE residual of non-solutions", "pi", "residual"}));
  }
}

// ------------------------------------------------------------- duality_check

void duality_scenario(const ScenarioConfig& cfg, const RunOptions& opt, ScenarioResult& res) {
  std::vector<std::vector<double>> rows(cfg.rows);
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    Rng rng = Rng::substream(cfg.seed, "duality_rows", i);
    const std::size_t k = 2 + rng.index(cfg.max_k - 1);
    std::vector<double> w(k);
    for (double& v : w) v = 0.05 + rng.uniform();
    rows[i] = TabularPolicy::normalized({w}).rows().front();
  }
  std::vector<FenchelResult> results(rows.size());
  parallel_for(rows.size(), opt.jobs,
               [&](std::size_t i) { results[i] = fenchel_duality_check(rows[i]); });
  CsvWriter csv({"row", "k", "gap", "maximum", "negative_entropy", "converged", "iterations"});
  std::uint64_t unconverged = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = results[i];
    csv.cell(static_cast<std::uint64_t>(i))
        .cell(static_cast<std::uint64_t>(rows[i].size()))
        .cell(r.gap)
        .cell(r.maximum)
        .cell(r.negative_entropy)
        .cell(r.converged)
        .cell(static_cast<std::uint64_t>(r.iterations))
        .end_row();
    unconverged += r.converged ? 0 : 1;
  }
  res.outputs.add("duality.csv", csv.text());
  if (unconverged) res.warnings["unconverged_duality_rows"] = unconverged;
}

// ---------------------------------------------------------------- reward_fit

void reward_fit_scenario(const ScenarioConfig& cfg, const RunOptions&, ScenarioResult& res) {
  const RewardTable truth(cfg.tabular->rewards);
  std::vector<std::size_t> sizes;
  for (std::size_t x = 0; x < truth.num_prompts(); ++x) sizes.push_back(truth.num_responses(x));
  const bool has_ref = cfg.tabular->reference.has_value();
  const TabularPolicy sampler =
      has_ref ? TabularPolicy(*cfg.tabular->reference) : TabularPolicy::uniform(sizes);
  const std::string sampler_id = has_ref ? "reference" : "uniform";

  const ComparisonDataset data = generate_comparisons(
      truth, sampler, cfg.comparisons, mix_seed(cfg.seed, "reward_fit"), sampler_id);
  const RewardFit mle = fit_reward_mle(data, cfg.fit);
  const RewardFit population = fit_reward_population(pairwise_preferences(truth), cfg.fit);

  CsvWriter comparisons({"prompt", "winner", "loser"});
  for (const auto& c : data.records()) {
    comparisons.cell(static_cast<std::uint64_t>(c.prompt))
        .cell(static_cast<std::uint64_t>(c.winner))
        .cell(static_cast<std::uint64_t>(c.loser))
        .end_row();
  }
  res.outputs.add("comparisons.csv", comparisons.text());
  nlohmann::ordered_json meta;
  meta["seed"] = data.metadata().seed;
  meta["sampler_id"] = data.metadata().sampler_id;
  meta["records"] = data.size();
  meta["responses_per_prompt"] = data.responses_per_prompt();
  res.outputs.add("comparisons.json", json_text(meta));

  CsvWriter fitted({"prompt", "response", "true_reward", "mle_reward", "population_reward"});
  double max_prob_error = 0.0;
  for (std::size_t x = 0; x < truth.num_prompts(); ++x) {
    const double base = truth(x, 0);
    for (std::size_t y = 0; y < truth.num_responses(x); ++y) {
      const double t = cfg.fit.normalization == Normalization::kFirstResponseZero
                           ? truth(x, y) - base
                           : truth(x, y) - accurate_sum(truth.row(x)) / truth.num_responses(x);
      fitted.cell(static_cast<std::uint64_t>(x))
          .cell(static_cast<std::uint64_t>(y))
          .cell(t)
          .cell(mle.rewards(x, y))
          .cell(population.rewards(x, y))
          .end_row();
      for (std::size_t z = 0; z < truth.num_responses(x); ++z) {
        const double err = std::fabs(btl_preference(mle.rewards(x, y), mle.rewards(x, z)) -
                                     btl_preference(truth(x, y), truth(x, z)));
        max_prob_error = std::max(max_prob_error, err);
      }
    }
  }
  res.outputs.add("fitted_rewards.csv", fitted.text());

  nlohmann::ordered_json summary;
  summary["comparisons"] = data.size();
  summary["nll_true"] = num(nll_loss(truth, data));
  summary["nll_fitted"] = num(nll_loss(mle.rewards, data));
  summary["mle_converged"] = mle.converged;
  summary["mle_iterations"] = mle.iterations;
  summary["mle_gradient_norm"] = num(mle.gradient_norm);
  summary["mle_max_pairwise_probability_error"] = num(max_prob_error);
  summary["population_converged"] = population.converged;
  summary["population_realizable"] = population.realizable;
  summary["population_max_probability_residual"] = num(population.max_probability_residual);
  summary["unidentified"] = nlohmann::ordered_json::array();
  for (const auto& [x, y] : mle.unidentified) {
    summary["unidentified"].push_back({{"prompt", x}, {"response", y}});
  }
  res.outputs.add("fit_summary.json", json_text(summary));
  if (!mle.unidentified.empty()) res.warnings["unidentified_responses"] = mle.unidentified.size();
  if (!mle.converged) res.warnings["mle_not_converged"] = 1;
}

// ------------------------------------------------------------------ collapse

void collapse_scenario(const ScenarioConfig& cfg, const RunOptions& opt, ScenarioResult& res) {
  const SequenceModel& m = *cfg.sequence;
  struct Job {
    std::size_t length;
    std::size_t repeat;
    CollapseHistogram hist;
  };
  std::vector<Job> jobs;
  for (std::size_t L : cfg.length_grid) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) jobs.push_back({L, r, {}});
  }
  parallel_for(jobs.size(), opt.jobs, [&](std::size_t i) {
    Job& job = jobs[i];
    const std::uint64_t seed =
        mix_seed(cfg.seed, "collapse_L" + std::to_string(job.length), job.repeat);
    const SequenceScenario sc =
        make_sequence_scenario({m.vocab_size, job.length}, m.markov_order, m.prompts,
                               m.reference_scale, m.reward_scale, seed);
    job.hist = collapse_histogram(sc.reference, sc.rewards, cfg.pairs, seed);
  });

  CsvWriter summary({"max_length", "repeat", "extreme_mass_ref", "central_mass_ref",
                     "extremity_gap"});
  for (const Job& job : jobs) {
    const std::string stem =
        "histogram_L" + std::to_string(job.length) + "_r" + std::to_string(job.repeat);
    CsvWriter csv({"bin_lo", "bin_hi", "count_ref", "count_reward"});
    std::vector<double> edges{0.0}, ref, reward;
    for (const auto& b : job.hist.bins) {
      csv.cell(b.lo)
          .cell(b.hi)
          .cell(static_cast<std::uint64_t>(b.count_ref))
          .cell(static_cast<std::uint64_t>(b.count_reward))
          .end_row();
      edges.push_back(b.hi);
      ref.push_back(static_cast<double>(b.count_ref));
      reward.push_back(static_cast<double>(b.count_reward));
    }
    res.outputs.add(stem + ".csv", csv.text());
    summary.cell(static_cast<std::uint64_t>(job.length))
        .cell(static_cast<std::uint64_t>(job.repeat))
        .cell(job.hist.extreme_mass_ref)
        .cell(job.hist.central_mass_ref)
        .cell(job.hist.extremity_gap())
        .end_row();
    if (opt.svg && job.repeat == 0) {
      res.outputs.add(stem + ".svg",
                      histogram_svg(edges, ref, "p_ref", reward, "p_reward",
                                    {"Pairwise preference histogram, L=" +
                                         std::to_string(job.length),
                                     "p(y1 | y1, y2)", "pairs"}));
    }
  }
  res.outputs.add("collapse_summary.csv", summary.text());
}

// ------------------------------------------------------------- align_compare

struct CellPlan {
  std::size_t scenario;
  std::size_t entry;
  double beta;
  std::optional<double> alpha;
  std::optional<std::size_t> alpha_index;
  std::optional<double> epsilon;
};

RegularizerSpec build_spec(const RegularizerEntry& e, const RewardTable& rewards,
                           const TabularPolicy* reference, const RegularSet* regular_set,
                           std::optional<double> epsilon, double kl_beta) {
  auto need_ref = [&]() -> const TabularPolicy& {
    if (!reference) throw ConfigError("model.reference: required by regularizer " + e.type);
    return *reference;
  };
  if (e.type == "none") return NoRegularizer{};
  if (e.type == "pm") {
    if (e.mean_zero) {
      PmRegularizer spec = mean_zero_pm(rewards, need_ref());
      std::vector<double> c1 = spec.c1.values();
      for (double& v : c1) v += e.c1;
      spec.c1 = PromptConstant(std::move(c1));
      spec.c2 = e.c2;
      return spec;
    }
    return PmRegularizer{e.c1, e.c2};
  }
  if (e.type == "kl") return KlRegularizer{need_ref(), kl_beta};
  if (e.type == "fdiv") return FDivRegularizer{FDivergenceSpec::by_name(e.f), need_ref(), kl_beta};
  if (e.type == "uniform_penalty") return UniformPenalty{};
  // conditional_pm: rewards centred by one unconditional constant.
  const TabularPolicy& ref = need_ref();
  EpsilonRule rule = epsilon ? EpsilonRule(ConstantEpsilon{*epsilon})
                             : EpsilonRule(RefCalibratedEpsilon{ref});
  return ConditionalPmRegularizer{*regular_set, std::move(rule),
                                  unconditional_mean_offset(rewards, ref) + e.c1, e.c2};
}

std::vector<CellPlan> plan_align_cells(const ScenarioConfig& cfg) {
  std::vector<CellPlan> plan;
  for (std::size_t s = 0; s < cfg.scenarios; ++s) {
    for (double beta : cfg.beta_grid) {
      for (std::size_t e = 0; e < cfg.regularizers.size(); ++e) {
        const auto& entry = cfg.regularizers[e];
        if (entry.type != "conditional_pm") {
          plan.push_back({s, e, beta, std::nullopt, std::nullopt, std::nullopt});
          continue;
        }
        for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
          if (entry.epsilon_constant) {
            for (double eps : cfg.epsilon_grid) {
              plan.push_back({s, e, beta, cfg.alpha_grid[a], a, eps});
            }
          } else {
            plan.push_back({s, e, beta, cfg.alpha_grid[a], a, std::nullopt});
          }
        }
      }
    }
  }
  return plan;
}

// ----------------------------------------------------------------- pm_property

void pm_property_scenario(const ScenarioConfig& cfg, const RunOptions& opt,
                          ScenarioResult& res) {
  const RewardTable rewards(cfg.tabular->rewards);
  std::optional<TabularPolicy> reference;
  if (cfg.tabular->reference) reference.emplace(*cfg.tabular->reference);
  const TabularPolicy* ref = reference ? &*reference : nullptr;

  struct Row {
    std::string regularizer;
    std::optional<double> beta, alpha, epsilon;
    PmPropertyResult result;
  };
  std::vector<Row> rows;
  OptimizerConfig oc = cfg.optimizer;
  oc.jobs = opt.jobs;
  for (const auto& e : cfg.regularizers) {
    std::vector<std::optional<double>> betas{std::nullopt};
    if (e.type == "kl" || e.type == "fdiv") {
      betas.assign(cfg.beta_grid.begin(), cfg.beta_grid.end());
    }
    for (const auto& beta : betas) {
      if (e.type != "conditional_pm") {
        const auto spec = build_spec(e, rewards, ref, nullptr, std::nullopt, beta.value_or(1.0));
        rows.push_back({e.type, beta, std::nullopt, std::nullopt,
                        pm_property_test(rewards, spec, oc)});
        continue;
      }
      for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
        RegularSet set = RegularSet::all(ref->sizes());
        try {
          set = RegularSet::from_threshold(*ref, cfg.alpha_grid[a]);
        } catch (const ConfigError& err) {
          throw ConfigError("alpha_grid[" + std::to_string(a) + "]: " + err.what());
        }
        std::vector<std::optional<double>> eps{std::nullopt};
        if (e.epsilon_constant) eps.assign(cfg.epsilon_grid.begin(), cfg.epsilon_grid.end());
        for (const auto& ep : eps) {
          const auto spec = build_spec(e, rewards, ref, &set, ep, 1.0);
          rows.push_back({e.type, std::nullopt, cfg.alpha_grid[a], ep,
                          pm_property_test(rewards, spec, oc)});
        }
      }
    }
  }

  CsvWriter csv({"regularizer", "beta", "alpha", "epsilon", "verdict", "max_tv", "converged",
                 "iterations"});
  std::uint64_t unconverged = 0;
  for (const auto& r : rows) {
    csv.cell(r.regularizer)
        .cell(cell_or_empty(r.beta))
        .cell(cell_or_empty(r.alpha))
        .cell(cell_or_empty(r.epsilon))
        .cell(r.result.pass ? "PASS" : "FAIL")
        .cell(r.result.max_tv)
        .cell(r.result.run.converged)
        .cell(static_cast<std::uint64_t>(r.result.run.max_iterations_used))
        .end_row();
    unconverged += r.result.run.converged ? 0 : 1;
  }
  res.outputs.add("pm_property.csv", csv.text());
  if (unconverged) res.warnings["unconverged_runs"] = unconverged;
}

void align_compare_scenario(const ScenarioConfig& cfg, const RunOptions& opt,
                            ScenarioResult& res) {
  const auto cells = align_compare_cells(cfg, opt.jobs);
  CsvWriter table({"scenario", "regularizer", "alpha", "beta", "epsilon", "pm_divergence",
                   "length", "perplexity", "entropy", "kl", "win_rate", "converged"});
  std::uint64_t sentinels = 0, clamped = 0, unconverged = 0;
  std::map<std::string, Series> by_regularizer;
  for (const auto& c : cells) {
    table.cell(static_cast<std::uint64_t>(c.scenario))
        .cell(c.regularizer)
        .cell(cell_or_empty(c.alpha))
        .cell(c.beta)
        .cell(cell_or_empty(c.epsilon))
        .cell(c.metrics.pm_divergence)
        .cell(c.metrics.avg_length)
        .cell(c.metrics.perplexity)
        .cell(c.metrics.entropy)
        .cell(c.metrics.kl_to_ref)
        .cell(c.metrics.win_rate)
        .cell(c.converged)
        .end_row();
    res.outputs.add("metrics/" + c.id() + ".json", metrics_json(c.metrics));
    res.outputs.add("metrics/" + c.id() + ".csv", metrics_csv(c.metrics));
    if (cfg.optimizer.record_stride > 0) {
      CsvWriter traj({"prompt", "iteration", "objective", "grad_norm"});
      for (const auto& p : c.trajectory) {
        traj.cell(static_cast<std::uint64_t>(p.prompt))
            .cell(static_cast<std::uint64_t>(p.iteration))
            .cell(p.objective)
            .cell(p.grad_norm)
            .end_row();
      }
      res.outputs.add("trajectories/" + c.id() + ".csv", traj.text());
    }
    sentinels += c.metrics.sentinel_count;
    clamped += c.clamped;
    unconverged += c.converged ? 0 : 1;
    std::string label = c.regularizer;
    if (c.alpha) label += " alpha=" + format_double(*c.alpha);
    if (c.epsilon) label += " eps=" + format_double(*c.epsilon);
    if (cfg.beta_grid.size() > 1) label += " beta=" + format_double(c.beta);
    auto& s = by_regularizer[label];
    s.label = label;
    s.x.push_back(static_cast<double>(c.scenario));
    s.y.push_back(c.metrics.pm_divergence);
  }
  res.outputs.add("align_compare.csv", table.text());
  if (sentinels) res.warnings["metric_sentinels"] = sentinels;
  if (clamped) res.warnings["clamped_probabilities"] = clamped;
  if (unconverged) res.warnings["unconverged_runs"] = unconverged;
  if (opt.svg) {
    std::vector<Series> series;
    for (auto& [label, s] : by_regularizer) series.push_back(std::move(s));
    res.outputs.add("align_compare.svg",
                    line_chart_svg(series, {"PM divergence per scenario", "scenario",
                                            "PM divergence"}));
  }
}

}  // namespace

std::string AlignCell::id() const {
  std::string out = "s" + std::to_string(scenario) + "_" + regularizer + "_b" + format_double(beta);
  if (alpha) out += "_a" + format_double(*alpha);
  if (epsilon) out += "_e" + format_double(*epsilon);
  return out;
}

std::vector<AlignCell> align_compare_cells(const ScenarioConfig& cfg, std::size_t jobs) {
  const SequenceModel& m = *cfg.sequence;
  const Vocabulary vocab{m.vocab_size, m.max_length};
  std::vector<SequenceScenario> scenarios;
  std::vector<TabularPolicy> references;
  for (std::size_t s = 0; s < cfg.scenarios; ++s) {
    scenarios.push_back(make_sequence_scenario(vocab, m.markov_order, m.prompts,
                                               m.reference_scale, m.reward_scale,
                                               mix_seed(cfg.seed, "align_scenario", s)));
    references.push_back(flatten_to_tabular(scenarios.back().reference));
  }
  // Regular sets are shared by every cell with the same (scenario, alpha).
  std::vector<std::vector<RegularSet>> sets(cfg.scenarios);
  for (std::size_t s = 0; s < cfg.scenarios; ++s) {
    for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
      try {
        sets[s].push_back(regular_set_from_threshold(scenarios[s].reference, cfg.alpha_grid[a]));
      } catch (const ConfigError& err) {
        throw ConfigError("alpha_grid[" + std::to_string(a) + "]: " + err.what());
      }
    }
  }

  const auto plan = plan_align_cells(cfg);
  std::vector<AlignCell> cells(plan.size());
  const std::size_t fit_order = std::max(m.markov_order, m.max_length - 1);
  parallel_for(plan.size(), jobs, [&](std::size_t i) {
    const CellPlan& p = plan[i];
    const auto& entry = cfg.regularizers[p.entry];
    const SequenceScenario& sc = scenarios[p.scenario];
    const TabularPolicy& ref = references[p.scenario];
    // Rewards enter alignment as r / beta; KL-type terms then carry weight 1.
    const RewardTable scaled = sc.rewards.scaled(1.0 / p.beta);
    const RegularSet* set = p.alpha_index ? &sets[p.scenario][*p.alpha_index] : nullptr;
    const RegularizerSpec spec = build_spec(entry, scaled, &ref, set, p.epsilon, 1.0);

    OptimizerConfig oc = cfg.optimizer;
    oc.jobs = 1;
    std::optional<SoftmaxPolicy> init;
    if (oc.initialization == Initialization::kReference) {
      init = SoftmaxPolicy::from_policy(ref);
    }
    const OptimizeResult run = optimize(scaled, spec, oc, init);
    if (run.failed) throw OptimizerError("align_compare cell " + std::to_string(i) + ": " + run.failure);
    const TabularPolicy aligned = run.policy.probabilities();
    ClampLog log;
    (void)objective_value(aligned, scaled, spec, &log);
    const AutoregressivePolicy ar = fit_autoregressive(aligned, vocab, fit_order);

    MetricSamplerConfig mc = cfg.metrics;
    mc.seed = mix_seed(cfg.seed, "align_metrics", i);
    AlignCell& cell = cells[i];
    cell.scenario = p.scenario;
    cell.regularizer = entry.type;
    cell.beta = p.beta;
    cell.alpha = p.alpha;
    cell.epsilon = p.epsilon;
    cell.metrics = evaluate_sequence_policy(ar, sc.reference, sc.rewards, p.beta, mc);
    cell.converged = run.converged;
    cell.iterations = run.max_iterations_used;
    cell.clamped = log.clamped;
    cell.trajectory = run.trajectory;
  });
  return cells;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json doc;
  doc["pm_divergence"] = num(r.pm_divergence);
  doc["length"] = num(r.avg_length);
  doc["perplexity"] = num(r.perplexity);
  doc["entropy"] = num(r.entropy);
  doc["kl"] = num(r.kl_to_ref);
  doc["win_rate"] = num(r.win_rate);
  doc["sentinel_count"] = r.sentinel_count;
  doc["pm_divergence_instances"] = nlohmann::ordered_json::array();
  for (double v : r.pm_divergence_instances) doc["pm_divergence_instances"].push_back(num(v));
  return json_text(doc);
}

std::string metrics_csv(const MetricsReport& r) {
  CsvWriter csv({"pm_divergence", "length", "perplexity", "entropy", "kl"});
  csv.cell(r.pm_divergence).cell(r.avg_length).cell(r.perplexity).cell(r.entropy).cell(r.kl_to_ref);
  csv.end_row();
  return csv.text();
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt) {
  ScenarioResult res;
  Stopwatch watch(res.timings_ms);
  using Body = void (*)(const ScenarioConfig&, const RunOptions&, ScenarioResult&);
  Body body = nullptr;
  switch (cfg.kind) {
    case ScenarioKind::kBiasCurve: body = bias_curve_scenario; break;
    case ScenarioKind::kOdeCheck: body = ode_check_scenario; break;
    case ScenarioKind::kDualityCheck: body = duality_scenario; break;
    case ScenarioKind::kRewardFit: body = reward_fit_scenario; break;
    case ScenarioKind::kCollapse: body = collapse_scenario; break;
    case ScenarioKind::kAlignCompare: body = align_compare_scenario; break;
    case ScenarioKind::kPmProperty: body = pm_property_scenario; break;
  }
  watch.time(scenario_name(cfg.kind), [&] { body(cfg, opt, res); });

  nlohmann::ordered_json effective = nlohmann::ordered_json::parse(canonical_config(cfg));
  res.outputs.add("config.json", json_text(effective));
  return res;
}

RunManifest run_to_directory(const ScenarioConfig& cfg, const RunOptions& opt,
                             const std::filesystem::path& out_dir) {
  ScenarioResult res = run_scenario(cfg, opt);
  Stopwatch watch(res.timings_ms);
  watch.time("write_outputs", [&] { res.outputs.write_all(out_dir); });

  RunManifest manifest;
  manifest.scenario = scenario_name(cfg.kind);
  manifest.config_sha256 = sha256_hex(canonical_config(cfg));
  manifest.seed = cfg.seed;
  for (const auto& [name, content] : res.outputs.files()) {
    manifest.checksums[name] = sha256_hex(content);
  }
  manifest.timings_ms = res.timings_ms;
  manifest.warnings = res.warnings;
  write_manifest(out_dir, manifest);
  return manifest;
}

}  // namespace pmlab
