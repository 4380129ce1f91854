// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "scenarios.hpp"
#include "pmrlhf/closed_form.hpp"
#include "pmrlhf/metrics.hpp"
#include "pmrlhf/optimizer.hpp"
#include "pmrlhf/regularizers.hpp"
#include "pmrlhf/reward_learning.hpp"
#include "pmrlhf/sequence.hpp"

namespace fs = std::filesystem;
using namespace pmrlhf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> uniform_vector(std::mt19937_64& g, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(k);
  for (double& x : v) x = d(g);
  return v;
}

std::vector<double> positive_row(std::mt19937_64& g, std::size_t k) {
  auto v = uniform_vector(g, k, 0.05, 1.05);
  double s = 0;
  for (double x : v) s += x;
  for (double& x : v) x /= s;
  return v;
}

double tv(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return 0.5 * s;
}

double max_tv(const TabularPolicy& a, const TabularPolicy& b) {
  double worst = 0;
  for (std::size_t x = 0; x < a.num_prompts(); ++x) worst = std::max(worst, tv(a.row(x), b.row(x)));
  return worst;
}

std::vector<double> softmax(const std::vector<double>& r) {
  const double m = *std::max_element(r.begin(), r.end());
  std::vector<double> out(r.size());
  double z = 0;
  for (std::size_t i = 0; i < r.size(); ++i) z += out[i] = std::exp(r[i] - m);
  for (double& v : out) v /= z;
  return out;
}

Outcome closed_form_equivalence() {
  std::mt19937_64 g(101);
  const double betas[] = {0.1, 0.5, 1.0};
  double worst_kl = 0, worst_pm = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + g() % 19;
    const RewardTable r({uniform_vector(g, k, -3, 3)});
    const auto ref = TabularPolicy::normalized({positive_row(g, k)});
    const double beta = betas[t % 3];
    worst_kl = std::max(worst_kl, max_tv(optimize(r, KlRegularizer{ref, beta}).policy.probabilities(),
                                         kl_rlhf_solution(r, ref, beta)));
    worst_pm = std::max(worst_pm, max_tv(optimize(r, PmRegularizer{}).policy.probabilities(),
                                         pm_rlhf_solution(r)));
  }
  return {worst_kl <= 1e-6 && worst_pm <= 1e-6,
          "max TV kl " + fmt("%.2e", worst_kl) + ", pm " + fmt("%.2e", worst_pm)};
}

Outcome pm_ode() {
  double worst_family = 0;
  for (double a : {-1.0, 0.0, 1.0}) {
    for (double b : {-1.0, 0.0, 1.0}) {
      for (int i = 1; i <= 99; ++i) {
        worst_family = std::max(worst_family, std::fabs(pm_ode_residual(pm_family(a, b), i / 100.0)));
      }
    }
  }
  const std::vector<SmoothFunction> others{[](Jet p) { return p * p; },
                                           [](Jet p) { return sqrt(p); },
                                           [](Jet p) { return Jet(0.0) - p * log(p); }};
  double weakest = 1e300;
  for (const auto& f : others) {
    double worst = 0;
    for (int i = 1; i <= 99; ++i) worst = std::max(worst, std::fabs(pm_ode_residual(f, i / 100.0)));
    weakest = std::min(weakest, worst);
  }
  return {worst_family <= 1e-8 && weakest >= 0.1,
          "family max " + fmt("%.2e", worst_family) + ", non-solutions min-of-max " +
              fmt("%.3g", weakest)};
}

Outcome bias_identity() {
  double worst = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double p = i / 1000.0;
    worst = std::max(worst, std::fabs(binary_rlhf_preference(0.5, p) - p));
    worst = std::max(worst, std::fabs(bias_curve(1.0, 0.5, {p})[0].p_rlhf - p));
  }
  bool endpoints = true;
  for (int i = 1; i < 100; ++i) {
    endpoints = endpoints && binary_rlhf_preference(0.0, i / 100.0) == 0.0 &&
                binary_rlhf_preference(1.0, i / 100.0) == 1.0;
  }
  const double sharp = bias_curve(0.1, 0.5, {0.7})[0].p_rlhf;
  return {worst <= 1e-12 && endpoints && sharp > 0.99,
          "identity dev " + fmt("%.1e", worst) + ", endpoints " + (endpoints ? "exact" : "wrong") +
              ", beta 0.1 gives " + fmt("%.6f", sharp)};
}

Outcome kl_pm_failure() {
  const RewardTable r({{0.0, 0.0}});
  const TabularPolicy ref({{0.9, 0.1}});
  const auto kl = pm_property_test(r, KlRegularizer{ref, 1.0});
  const auto pm = pm_property_test(r, PmRegularizer{});
  return {!kl.pass && kl.max_tv >= 0.01 && pm.pass,
          "kl " + std::string(kl.pass ? "PASS" : "FAIL") + " tv " + fmt("%.6f", kl.max_tv) +
              ", pm " + (pm.pass ? "PASS" : "FAIL") + " tv " + fmt("%.1e", pm.max_tv)};
}

Outcome conditional_pm() {
  const Vocabulary vocab{4, 3};
  const std::size_t order = 2;
  const auto sc = make_sequence_scenario(vocab, order, 3, 1.0, 1.0, 505);
  const auto flat_ref = flatten_to_tabular(sc.reference);
  OptimizerConfig cfg;
  cfg.initialization = Initialization::kReference;
  double worst = 0;
  for (double alpha : {0.01, 0.03, 0.06}) {
    const auto set = RegularSet::from_threshold(flat_ref, alpha);
    const auto run = optimize(sc.rewards, ConditionalPmRegularizer{set, RefCalibratedEpsilon{flat_ref},
                                                                   0.0, 0.0},
                              cfg);
    const auto seq = fit_autoregressive(run.policy.probabilities(), vocab, order);
    const auto flat = flatten_to_tabular(seq);
    for (std::size_t x = 0; x < flat.num_prompts(); ++x) {
      std::vector<double> on_m, r_m;
      for (std::size_t y = 0; y < flat.num_responses(x); ++y) {
        if (!set.contains(x, y)) continue;
        on_m.push_back(flat(x, y));
        r_m.push_back(sc.rewards(x, y));
      }
      double mass = 0;
      for (double v : on_m) mass += v;
      for (double& v : on_m) v /= mass;
      worst = std::max(worst, tv(on_m, softmax(r_m)));
    }
  }
  const auto set = RegularSet::from_threshold(flat_ref, 0.03);
  bool monotone = true;
  double previous = 0;
  for (int e = 1; e <= 6; ++e) {
    const auto p = optimize(sc.rewards,
                            ConditionalPmRegularizer{set, ConstantEpsilon{std::pow(10.0, -e)}, 0.0, 0.0})
                       .policy.probabilities();
    double mass = 0;
    for (std::size_t x = 0; x < p.num_prompts(); ++x) {
      for (std::size_t y = 0; y < p.num_responses(x); ++y) mass += set.contains(x, y) ? p(x, y) : 0;
    }
    mass /= static_cast<double>(p.num_prompts());
    monotone = monotone && mass > previous;
    previous = mass;
  }
  return {worst <= 1e-4 && monotone, "max conditional TV " + fmt("%.2e", worst) +
                                         ", regular mass monotone " + (monotone ? "yes" : "no")};
}

Outcome reward_mle() {
  std::mt19937_64 g(606);
  double worst_population = 0;
  for (std::size_t k = 2; k <= 10; ++k) {
    const auto truth = uniform_vector(g, k, -3, 3);
    const auto fit = fit_reward_population(pairwise_preferences(RewardTable({truth})));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        worst_population = std::max(worst_population,
                                    std::fabs(btl_preference(fit.rewards(0, i), fit.rewards(0, j)) -
                                              btl_preference(truth[i], truth[j])));
      }
    }
  }
  const std::vector<double> truth{0.0, 1.0, -0.5, 2.0};
  const RewardTable r({truth});
  const auto sampler = TabularPolicy::uniform(std::vector<std::size_t>{truth.size()});
  const int trials = 20;
  int good = 0;
  for (int s = 0; s < trials; ++s) {
    const auto fit = fit_reward_mle(generate_comparisons(r, sampler, 100000, 7000 + s));
    double worst = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (std::size_t j = 0; j < truth.size(); ++j) {
        worst = std::max(worst, std::fabs(btl_preference(fit.rewards(0, i), fit.rewards(0, j)) -
                                          btl_preference(truth[i], truth[j])));
      }
    }
    good += worst <= 0.02 ? 1 : 0;
  }
  return {worst_population <= 1e-6 && good >= 19,
          "population max error " + fmt("%.2e", worst_population) + ", empirical " +
              std::to_string(good) + "/" + std::to_string(trials) + " within 0.02"};
}

Outcome duality() {
  std::mt19937_64 g(707);
  double worst = 0;
  bool converged = true;
  for (int t = 0; t < 50; ++t) {
    const auto res = fenchel_duality_check(positive_row(g, 2 + g() % 19));
    worst = std::max(worst, res.gap);
    converged = converged && res.converged;
  }
  return {worst <= 1e-8 && converged, "max gap " + fmt("%.2e", worst)};
}

Outcome metric_identities() {
  std::mt19937_64 g(808);
  const RewardTable r({uniform_vector(g, 12, -3, 3), uniform_vector(g, 9, -3, 3)});
  const double pm_div =
      aggregate_pm_divergence(pm_rlhf_solution(r), r, 1.0, SamplingMode::kExact, 0, 0).mean;
  double entropy_dev = 0;
  for (std::size_t k = 2; k <= 50; ++k) {
    entropy_dev = std::max(entropy_dev,
                           std::fabs(entropy(TabularPolicy::uniform(std::vector<std::size_t>{k})) -
                                     std::log(static_cast<double>(k))));
  }
  const auto u = AutoregressivePolicy::uniform({4, 3}, 1, 1);
  const std::vector<std::pair<std::size_t, Response>> eval{{0, {kEos}}, {0, {3, kEos}}};
  const double ppl = perplexity(u, eval).value;

  const RewardTable rr({uniform_vector(g, 6, -2, 2)});
  const auto ref = TabularPolicy::normalized({positive_row(g, 6)});
  const auto pi = kl_rlhf_solution(rr, ref, 1.0);
  const double exact = aggregate_pm_divergence(pi, rr, 1.0, SamplingMode::kExact, 0, 0).mean;
  const std::size_t n = 2000;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto mc = aggregate_pm_divergence(pi, rr, 1.0, SamplingMode::kMonteCarlo, n, seed);
    within += std::fabs(mc.mean - exact) <= 3 * mc.sample_std / std::sqrt(double(n)) ? 1 : 0;
  }
  return {pm_div <= 1e-10 && entropy_dev <= 1e-12 && std::fabs(ppl - 4.0) <= 1e-9 && within >= 95,
          "pm divergence " + fmt("%.1e", pm_div) + ", entropy dev " + fmt("%.1e", entropy_dev) +
              ", perplexity " + fmt("%.12f", ppl) + ", mc " + std::to_string(within) + "/100"};
}

Outcome toy_collapse() {
  const std::size_t lengths[] = {2, 4, 6, 8};
  int inversions = 0;
  bool extreme_wins = true;
  std::string gaps;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    double previous = -2;
    for (std::size_t l : lengths) {
      Rng rng(mix_seed(909 + seed, "acceptance_collapse", l));
      const Vocabulary vocab{5, l};
      const auto ref = AutoregressivePolicy::random(vocab, 1, 1, 0.1, rng);
      const RewardTable zero({std::vector<double>(vocab.response_count(), 0.0)});
      const auto h = collapse_histogram(ref, zero, 10000, seed);
      if (!(h.extremity_gap() > previous)) ++inversions;
      previous = h.extremity_gap();
      if (l == 8) {
        extreme_wins = extreme_wins && h.extreme_mass_ref > h.central_mass_ref;
        gaps += (gaps.empty() ? "" : " ") + fmt("%.3f", h.extremity_gap());
      }
    }
  }
  return {extreme_wins && inversions <= 1,
          "L=8 gaps " + gaps + ", inversions " + std::to_string(inversions)};
}

Outcome directional_table1() {
  const auto cfg =
      pmlab::parse_config(pmlab::load_json(fs::path(PMLAB_DOCS_DIR) / "examples" / "align_compare.json"));
  const auto cells = pmlab::align_compare_cells(cfg, 4);
  std::map<std::size_t, double> kl;
  std::map<double, std::map<std::size_t, double>> cond;
  for (const auto& c : cells) {
    if (c.regularizer == "kl") kl[c.scenario] = c.metrics.pm_divergence;
    if (c.regularizer == "conditional_pm") cond[*c.alpha][c.scenario] = c.metrics.pm_divergence;
  }
  bool pass = kl.size() == 10 && !cond.empty();
  std::string detail;
  for (const auto& [alpha, by_scenario] : cond) {
    int wins = 0;
    for (const auto& [s, v] : by_scenario) wins += v < kl.at(s) ? 1 : 0;
    pass = pass && wins >= 9 && by_scenario.size() == 10;
    detail += (detail.empty() ? "" : ", ") + std::string("alpha ") + fmt("%g", alpha) + ": " +
              std::to_string(wins) + "/" + std::to_string(by_scenario.size());
  }
  return {pass, "conditional pm wins " + detail};
}

Outcome gradient_check() {
  std::mt19937_64 g(1111);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + g() % 9;
    const RewardTable r({uniform_vector(g, k, -3, 3), uniform_vector(g, k, -3, 3)});
    const auto ref = TabularPolicy::normalized({positive_row(g, k), positive_row(g, k)});
    const auto set = RegularSet::from_threshold(ref, 0.8 / static_cast<double>(k));
    std::vector<RegularizerSpec> specs{NoRegularizer{}, PmRegularizer{0.4, 0.2},
                                       KlRegularizer{ref, 0.6}, UniformPenalty{},
                                       ConditionalPmRegularizer{set, ConstantEpsilon{0.05}, 0.1, 0.0},
                                       ConditionalPmRegularizer{set, RefCalibratedEpsilon{ref}, 0.0, 0.0}};
    for (const auto& name : FDivergenceSpec::known_names()) {
      specs.push_back(FDivRegularizer{FDivergenceSpec::by_name(name), ref, 0.8});
    }
    const std::vector<std::vector<double>> logits{uniform_vector(g, k, -1, 1),
                                                  uniform_vector(g, k, -1, 1)};
    for (const auto& spec : specs) {
      const auto grad = objective_gradient(SoftmaxPolicy(logits), r, spec);
      for (std::size_t x = 0; x < 2; ++x) {
        for (std::size_t i = 0; i < k; ++i) {
          auto up = logits, down = logits;
          up[x][i] += 1e-6;
          down[x][i] -= 1e-6;
          const double fd = (objective_value(SoftmaxPolicy(up).probabilities(), r, spec) -
                             objective_value(SoftmaxPolicy(down).probabilities(), r, spec)) /
                            2e-6;
          worst = std::max(worst, std::fabs(grad[x][i] - fd) / std::max(1.0, std::fabs(fd)));
        }
      }
    }
  }
  return {worst <= 1e-5, "max relative error " + fmt("%.2e", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "pmlab_acceptance_determinism";
  fs::remove_all(root);
  std::size_t files = 0, scenarios = 0;
  std::string mismatch;
  for (const auto& entry : fs::directory_iterator(fs::path(PMLAB_DOCS_DIR) / "examples")) {
    if (entry.path().extension() != ".json") continue;
    const auto cfg = pmlab::parse_config(pmlab::load_json(entry.path()));
    const auto stem = entry.path().stem().string();
    const auto a = root / (stem + "_a"), b = root / (stem + "_b");
    pmlab::run_to_directory(cfg, {1, true}, a);
    pmlab::run_to_directory(cfg, {4, true}, b);
    ++scenarios;
    for (const auto& f : fs::recursive_directory_iterator(a)) {
      if (!f.is_regular_file() || f.path().filename() == "manifest.json") continue;
      const auto rel = fs::relative(f.path(), a);
      ++files;
      if (!fs::exists(b / rel) || slurp(f.path()) != slurp(b / rel)) mismatch = (stem + "/") += rel.string();
    }
  }
  fs::remove_all(root);
  return {mismatch.empty() && scenarios > 0,
          std::to_string(files) + " files across " + std::to_string(scenarios) + " scenarios" +
              (mismatch.empty() ? " identical" : ", first mismatch " + mismatch)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form oracle equivalence", closed_form_equivalence},
      {"pm differential equation", pm_ode},
      {"bias identity and collapse", bias_identity},
      {"kl fails preference matching", kl_pm_failure},
      {"conditional pm on the regular set", conditional_pm},
      {"reward maximum likelihood", reward_mle},
      {"fenchel duality", duality},
      {"metric identities", metric_identities},
      {"toy preference collapse", toy_collapse},
      {"conditional pm beats kl on pm divergence", directional_table1},
      {"gradient correctness", gradient_check},
      {"deterministic outputs", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += out.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.2fs]\n", out.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
