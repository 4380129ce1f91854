#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "pmrlhf/errors.hpp"
#include "pmrlhf/reward_learning.hpp"

using namespace pmrlhf;

namespace {

TabularPolicy uniform_sampler(const RewardTable& r) {
  std::vector<std::size_t> sizes;
  for (std::size_t x = 0; x < r.num_prompts(); ++x) sizes.push_back(r.num_responses(x));
  return TabularPolicy::uniform(sizes);
}

// Expected cross-entropy over uniformly drawn unordered pairs, written out
// directly from the logistic link.
double population_loss(const std::vector<double>& truth, const std::vector<double>& cand) {
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      const double p = oracle::logistic(truth[i] - truth[j]);
      const double q = oracle::logistic(cand[i] - cand[j]);
      total -= p * std::log(q) + (1 - p) * std::log(1 - q);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double max_pairwise_error(const RewardTable& fit, const std::vector<double>& truth) {
  double worst = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      worst = std::max(worst, std::fabs(oracle::logistic(fit(0, i) - fit(0, j)) -
                                        oracle::logistic(truth[i] - truth[j])));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("reward_learning") {

TEST_CASE("equal rewards give even win rates") {
  const RewardTable r({{0.0, 0.0, 0.0}});
  const auto data = generate_comparisons(r, uniform_sampler(r), 100000, 17);
  std::map<std::pair<std::size_t, std::size_t>, std::pair<int, int>> tally;
  for (const auto& c : data.records()) {
    const auto key = std::minmax(c.winner, c.loser);
    auto& t = tally[{key.first, key.second}];
    (c.winner == key.first ? t.first : t.second) += 1;
  }
  CHECK(tally.size() == 3);
  for (const auto& [pair, t] : tally) {
    const double rate = static_cast<double>(t.first) / (t.first + t.second);
    CHECK(std::fabs(rate - 0.5) <= 0.01);
  }
}

TEST_CASE("winner frequency follows the logistic link") {
  const RewardTable r({{std::log(3.0), 0.0}});
  const auto data = generate_comparisons(r, uniform_sampler(r), 100000, 23);
  std::size_t first = 0;
  for (const auto& c : data.records()) first += c.winner == 0 ? 1 : 0;
  CHECK(std::fabs(static_cast<double>(first) / 100000.0 - 0.75) <= 0.01);
}

TEST_CASE("generation is deterministic in the seed") {
  const RewardTable r({{0.0, 1.0, -1.0}, {2.0, 0.0}});
  const auto a = generate_comparisons(r, uniform_sampler(r), 5000, 99);
  const auto b = generate_comparisons(r, uniform_sampler(r), 5000, 99);
  const auto c = generate_comparisons(r, uniform_sampler(r), 5000, 100);
  CHECK(a.records() == b.records());
  CHECK(a.records() != c.records());
  CHECK(a.metadata().seed == 99);
  for (const auto& rec : a.records()) CHECK(rec.winner != rec.loser);
}

TEST_CASE("degenerate sampler is rejected with the prompt named") {
  const RewardTable r({{0.0, 1.0}, {0.0, 1.0, 2.0}});
  const TabularPolicy sampler({{0.5, 0.5}, {1.0, 0.0, 0.0}});
  try {
    generate_comparisons(r, sampler, 10, 1);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("prompt 1") != std::string::npos);
  }
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(ComparisonDataset({3}, {{0, 1, 1}}), ContractError);
  CHECK_THROWS_AS(ComparisonDataset({3}, {{0, 3, 1}}), ContractError);
  CHECK_THROWS_AS(ComparisonDataset({3}, {{1, 0, 1}}), ContractError);
}

TEST_CASE("negative log-likelihood") {
  const ComparisonDataset data({3}, {{0, 0, 1}, {0, 2, 1}, {0, 1, 0}});
  CHECK(nll_loss(RewardTable({{0.0, 0.0, 0.0}}), data) == doctest::Approx(std::log(2.0)));
  const ComparisonDataset one({2}, {{0, 0, 1}});
  CHECK(nll_loss(RewardTable({{std::log(3.0), 0.0}}), one) ==
        doctest::Approx(-std::log(0.75)).epsilon(1e-14));
  const RewardTable cand({{0.3, -1.2, 2.0}});
  const std::vector<double> offset{7.5};
  CHECK(std::fabs(nll_loss(cand, data) - nll_loss(cand.shifted(offset), data)) <= 1e-14);
}

TEST_CASE("population fit recovers logits") {
  const auto fit = fit_reward_population({{{0.5, 0.75}, {0.25, 0.5}}});
  CHECK(fit.converged);
  CHECK(fit.realizable);
  CHECK(std::fabs(fit.rewards(0, 0) - fit.rewards(0, 1) - std::log(3.0)) <= 1e-6);

  const auto flat = fit_reward_population({{{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}});
  for (double v : flat.rewards.row(0)) CHECK(std::fabs(v) <= 1e-9);
}

TEST_CASE("cyclic preferences are flagged as non-realizable") {
  const PairwiseMatrix cyclic{{0.5, 0.9, 0.1}, {0.1, 0.5, 0.9}, {0.9, 0.1, 0.5}};
  // Transitivity oracle: any BTL model has p(1>2), p(2>3) > 1/2 => p(1>3) > 1/2.
  CHECK((cyclic[0][1] > 0.5 && cyclic[1][2] > 0.5 && cyclic[0][2] < 0.5));
  const auto fit = fit_reward_population({cyclic});
  CHECK_FALSE(fit.realizable);
  CHECK(fit.max_probability_residual > kRealizableTolerance);
}

TEST_CASE("population fit rejects inconsistent input") {
  CHECK_THROWS_AS(fit_reward_population({{{0.5, 0.7}, {0.4, 0.5}}}), DomainError);
  CHECK_THROWS_AS(fit_reward_population({{{0.5, 1.0}, {0.0, 0.5}}}), DomainError);
}

TEST_CASE("population fit reproduces BTL pairwise probabilities for k <= 10") {
  oracle::Random rng(31);
  for (std::size_t k = 2; k <= 10; ++k) {
    const auto truth = rng.vector(k, -3, 3);
    const auto fit = fit_reward_population(pairwise_preferences(RewardTable({truth})));
    CHECK(fit.realizable);
    CHECK(max_pairwise_error(fit.rewards, truth) <= 1e-6);
    CHECK(std::fabs(fit.rewards(0, 0)) <= 1e-12);
  }
}

TEST_CASE("true reward minimizes the population loss") {
  oracle::Random rng(37);
  const auto truth = rng.vector(5, -2, 2);
  const double at_truth = population_loss(truth, truth);
  for (int t = 0; t < 100; ++t) {
    auto cand = truth;
    const double shift = rng.uniform(-5, 5);
    for (double& v : cand) v += shift + rng.uniform(-0.5, 0.5);
    CHECK(at_truth <= population_loss(truth, cand) + 1e-15);
  }
}

TEST_CASE("empirical fit recovers reward differences") {
  const RewardTable r({{0.0, 1.0, 2.0}});
  const auto data = generate_comparisons(r, uniform_sampler(r), 100000, 41);
  const auto fit = fit_reward_mle(data);
  CHECK(fit.converged);
  CHECK(fit.unidentified.empty());
  CHECK(std::fabs(fit.rewards(0, 0)) <= 1e-12);
  CHECK(std::fabs(fit.rewards(0, 1) - 1.0) <= 0.05);
  CHECK(std::fabs(fit.rewards(0, 2) - 2.0) <= 0.05);
}

TEST_CASE("uncompared responses are reported") {
  const ComparisonDataset data({4}, {{0, 0, 1}, {0, 1, 2}, {0, 2, 0}});
  const auto fit = fit_reward_mle(data);
  REQUIRE(fit.unidentified.size() == 1);
  CHECK(fit.unidentified[0] == std::pair<std::size_t, std::size_t>{0, 3});
}

TEST_CASE("empirical error shrinks with sample size") {
  const std::vector<double> truth{0.0, 0.8, -0.5, 1.5};
  const RewardTable r({truth});
  int inversions = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    double previous = 1e300;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      const auto fit = fit_reward_mle(generate_comparisons(r, uniform_sampler(r), n, 500 + seed));
      const double err = max_pairwise_error(fit.rewards, truth);
      if (err >= previous) ++inversions;
      previous = err;
    }
  }
  CHECK(inversions <= 1);
}

TEST_CASE("fit config validation") {
  RewardFitConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.gradient_tolerance = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE
