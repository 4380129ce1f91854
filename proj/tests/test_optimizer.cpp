#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pmrlhf/closed_form.hpp"
#include "pmrlhf/optimizer.hpp"

using namespace pmrlhf;

namespace {

std::vector<double> as_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

TabularPolicy random_policy(oracle::Random& rng, std::size_t k) {
  return TabularPolicy::normalized({rng.simplex(k, 1e-3)});
}

double max_tv(const TabularPolicy& a, const TabularPolicy& b) {
  double worst = 0;
  for (std::size_t x = 0; x < a.num_prompts(); ++x) {
    worst = std::max(worst, oracle::tv(as_vec(a.row(x)), as_vec(b.row(x))));
  }
  return worst;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("logit gradient matches central differences") {
  oracle::Random rng(71);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = rng.integer(2, 8);
    const RewardTable r({rng.vector(k, -3, 3), rng.vector(k, -3, 3)});
    const TabularPolicy ref = TabularPolicy::normalized({rng.simplex(k, 0.05), rng.simplex(k, 0.05)});
    const auto set = RegularSet::from_threshold(ref, 0.8 / static_cast<double>(k));
    const std::vector<RegularizerSpec> specs{
        NoRegularizer{},
        PmRegularizer{0.5, 0.1},
        KlRegularizer{ref, 0.4},
        FDivRegularizer{FDivergenceSpec::squared_hellinger(), ref, 0.8},
        UniformPenalty{},
        ConditionalPmRegularizer{set, RefCalibratedEpsilon{ref}, 0.2, 0.0},
    };
    const std::vector<std::vector<double>> logits{rng.vector(k, -1, 1), rng.vector(k, -1, 1)};
    for (const auto& spec : specs) {
      const auto g = objective_gradient(SoftmaxPolicy(logits), r, spec);
      double worst = 0;
      for (std::size_t x = 0; x < 2; ++x) {
        for (std::size_t i = 0; i < k; ++i) {
          auto up = logits, down = logits;
          const double h = 1e-6;
          up[x][i] += h;
          down[x][i] -= h;
          const double fd = (objective_value(SoftmaxPolicy(up).probabilities(), r, spec) -
                             objective_value(SoftmaxPolicy(down).probabilities(), r, spec)) /
                            (2 * h);
          worst = std::max(worst, std::fabs(g[x][i] - fd) / std::max(1.0, std::fabs(fd)));
        }
      }
      CHECK_MESSAGE(worst <= 1e-5, regularizer_tag(spec));
    }
  }
}

TEST_CASE("gradient vanishes at the closed form and points uphill without regularizer") {
  const RewardTable r({{0.4, -1.0, 2.0}});
  const auto g = objective_gradient(SoftmaxPolicy::from_policy(pm_policy(r)), r, PmRegularizer{});
  for (double v : g[0]) CHECK(std::fabs(v) <= 1e-9);
  const auto h = objective_gradient(SoftmaxPolicy::zeros(std::vector<std::size_t>{2}),
                                    RewardTable({{1.0, 0.0}}), NoRegularizer{});
  CHECK(h[0][0] > 0);
  CHECK(h[0][1] < 0);
}

TEST_CASE("converges to the pm policy") {
  oracle::Random rng(73);
  for (int t = 0; t < 100; ++t) {
    const RewardTable r({rng.vector(rng.integer(2, 20), -3, 3)});
    const auto res = optimize(r, PmRegularizer{rng.uniform(-1, 1), 0.0});
    CHECK(res.converged);
    CHECK(max_tv(res.policy.probabilities(), pm_policy(r)) <= 1e-6);
  }
}

TEST_CASE("converges to the kl closed form") {
  oracle::Random rng(75);
  const double betas[] = {0.1, 0.5, 1.0};
  for (int t = 0; t < 60; ++t) {
    const std::size_t k = rng.integer(2, 20);
    const RewardTable r({rng.vector(k, -3, 3)});
    const auto ref = random_policy(rng, k);
    const double beta = betas[t % 3];
    const auto res = optimize(r, KlRegularizer{ref, beta});
    CHECK(res.converged);
    CHECK(max_tv(res.policy.probabilities(), kl_rlhf_solution(r, ref, beta)) <= 1e-6);
  }
}

TEST_CASE("no regularizer approaches the argmax") {
  const RewardTable r({{0.0, 1.0, 0.5}});
  OptimizerConfig cfg;
  cfg.max_iterations = 5000;
  const auto res = optimize(r, NoRegularizer{}, cfg);
  CHECK(res.policy.probabilities()(0, 1) >= 0.999);
}

TEST_CASE("pm property verdicts") {
  const RewardTable flat({{0.0, 0.0}});
  const TabularPolicy skew({{0.9, 0.1}});
  CHECK(pm_property_test(flat, PmRegularizer{1.0, 0.5}).pass);
  const auto kl = pm_property_test(flat, KlRegularizer{skew, 1.0});
  CHECK_FALSE(kl.pass);
  CHECK(kl.max_tv == doctest::Approx(0.4).epsilon(1e-6));
  const RewardTable r({{1.0, -0.5, 0.3}});
  CHECK(pm_property_test(r, KlRegularizer{TabularPolicy::uniform(std::vector<std::size_t>{3}), 1.0})
            .pass);
  CHECK(pm_property_test(r, UniformPenalty{}).pass);
}

TEST_CASE("trajectory is nondecreasing and runs are deterministic") {
  oracle::Random rng(77);
  const RewardTable r({rng.vector(12, -3, 3), rng.vector(7, -3, 3)});
  const TabularPolicy ref = TabularPolicy::normalized({rng.simplex(12, 0.01), rng.simplex(7, 0.01)});
  OptimizerConfig cfg;
  cfg.record_stride = 1;
  cfg.step_size = 4.0;
  const auto a = optimize(r, KlRegularizer{ref, 0.3}, cfg);
  REQUIRE(a.trajectory.size() > 2);
  for (std::size_t i = 1; i < a.trajectory.size(); ++i) {
    const auto& prev = a.trajectory[i - 1];
    const auto& cur = a.trajectory[i];
    if (prev.prompt == cur.prompt) CHECK(cur.objective >= prev.objective - 1e-14);
  }
  cfg.jobs = 4;
  const auto b = optimize(r, KlRegularizer{ref, 0.3}, cfg);
  CHECK(a.policy.logits() == b.policy.logits());
  CHECK(a.trajectory.size() == b.trajectory.size());
}

TEST_CASE("regular mass increases along the epsilon ladder") {
  oracle::Random rng(79);
  const RewardTable r({rng.vector(8, -2, 2)});
  const auto set = RegularSet::from_members({{1, 4, 6}}, std::vector<std::size_t>{8});
  double previous = 0;
  for (int e = 1; e <= 6; ++e) {
    const auto res = optimize(r, ConditionalPmRegularizer{set, ConstantEpsilon{std::pow(10.0, -e)},
                                                          0.0, 0.0});
    const auto p = res.policy.probabilities();
    const double mass = p(0, 1) + p(0, 4) + p(0, 6);
    CHECK(mass > previous);
    previous = mass;
  }
}

TEST_CASE("config validation") {
  OptimizerConfig cfg;
  cfg.step_size = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
