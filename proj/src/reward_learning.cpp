#include "pmrlhf/reward_learning.hpp"

#include <algorithm>
#include <cmath>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"
#include "pmrlhf/rng.hpp"

namespace pmrlhf {
namespace {

// weights[x][i][j]: mass of "i beats j" at prompt x.
using PairWeights = std::vector<std::vector<std::vector<double>>>;

void normalize(std::vector<std::vector<double>>& rows, Normalization rule) {
  for (auto& r : rows) {
    double shift = 0.0;
    if (rule == Normalization::kFirstResponseZero) {
      shift = r.front();
    } else {
      shift = accurate_sum(r) / static_cast<double>(r.size());
    }
    for (double& v : r) v -= shift;
  }
}

// Plain gradient descent on sum_x sum_{i,j} w_ij * -log sigmoid(r_i - r_j).
RewardFit descend(const PairWeights& weights, const RewardFitConfig& config) {
  config.validate();
  std::vector<std::vector<double>> r(weights.size());
  for (std::size_t x = 0; x < weights.size(); ++x) {
    r[x].assign(weights[x].size(), 0.0);
  }
  std::vector<std::vector<double>> grad = r;

  RewardFit out{RewardTable(std::vector<std::vector<double>>{}), false, 0, 0.0, {}, true, 0.0};
  for (std::size_t it = 0; it <= config.max_iterations; ++it) {
    double norm2 = 0.0;
    for (std::size_t x = 0; x < weights.size(); ++x) {
      const std::size_t k = weights[x].size();
      std::fill(grad[x].begin(), grad[x].end(), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double w = weights[x][i][j];
          if (w == 0.0) continue;
          // d/dr_i of -log sigmoid(r_i - r_j) = -(1 - sigmoid(r_i - r_j)).
          const double g = w * sigmoid(r[x][j] - r[x][i]);
          grad[x][i] -= g;
          grad[x][j] += g;
        }
      }
      for (double g : grad[x]) norm2 += g * g;
    }
    out.gradient_norm = std::sqrt(norm2);
    out.iterations = it;
    if (out.gradient_norm <= config.gradient_tolerance) {
      out.converged = true;
      break;
    }
    if (it == config.max_iterations) break;
    for (std::size_t x = 0; x < r.size(); ++x) {
      for (std::size_t i = 0; i < r[x].size(); ++i) {
        r[x][i] -= config.step_size * grad[x][i];
      }
    }
  }
  normalize(r, config.normalization);
  out.rewards = RewardTable(std::move(r));
  return out;
}

}  // namespace

ComparisonDataset::ComparisonDataset(
    std::vector<std::size_t> responses_per_prompt,
    std::vector<Comparison> records, ComparisonMetadata metadata)
    : responses_per_prompt_(std::move(responses_per_prompt)),
      records_(std::move(records)),
      metadata_(std::move(metadata)) {
  for (std::size_t n = 0; n < records_.size(); ++n) {
    const Comparison& c = records_[n];
    if (c.prompt >= responses_per_prompt_.size()) {
      throw ContractError("ComparisonDataset: record " + std::to_string(n) +
                          " has an out-of-range prompt");
    }
    const std::size_t k = responses_per_prompt_[c.prompt];
    if (c.winner >= k || c.loser >= k) {
      throw ContractError("ComparisonDataset: record " + std::to_string(n) +
                          " has an out-of-range response");
    }
    if (c.winner == c.loser) {
      throw ContractError("ComparisonDataset: record " + std::to_string(n) +
                          " compares a response with itself");
    }
  }
}

void RewardFitConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("RewardFitConfig: step_size must be > 0");
  if (!(gradient_tolerance > 0.0)) {
    throw ConfigError("RewardFitConfig: gradient_tolerance must be > 0");
  }
}

ComparisonDataset generate_comparisons(const RewardTable& true_rewards,
                                       const TabularPolicy& sampler,
                                       std::size_t n, std::uint64_t seed,
                                       std::string sampler_id) {
  const std::size_t prompts = true_rewards.num_prompts();
  if (sampler.num_prompts() != prompts) {
    throw ContractError("generate_comparisons: sampler/reward prompt mismatch");
  }
  for (std::size_t x = 0; x < prompts; ++x) {
    if (sampler.num_responses(x) != true_rewards.num_responses(x)) {
      throw ContractError("generate_comparisons: sampler/reward size mismatch");
    }
    const auto row = sampler.row(x);
    const auto positive = std::count_if(row.begin(), row.end(),
                                        [](double p) { return p > 0.0; });
    if (positive < 2) {
      throw ConfigError("generate_comparisons: sampler is degenerate on prompt " +
                        std::to_string(x));
    }
  }
  Rng rng = Rng::substream(seed, "comparisons");
  std::vector<Comparison> records;
  records.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t x = rng.index(prompts);
    const auto row = sampler.row(x);
    const std::size_t a = rng.categorical(row);
    std::size_t b = rng.categorical(row);
    while (b == a) b = rng.categorical(row);
    const double p_a = btl_preference(true_rewards(x, a), true_rewards(x, b));
    if (rng.uniform() < p_a) {
      records.push_back({x, a, b});
    } else {
      records.push_back({x, b, a});
    }
  }
  std::vector<std::size_t> sizes(prompts);
  for (std::size_t x = 0; x < prompts; ++x) sizes[x] = true_rewards.num_responses(x);
  return ComparisonDataset(std::move(sizes), std::move(records),
                           {seed, std::move(sampler_id)});
}

double nll_loss(const RewardTable& candidate, const ComparisonDataset& data) {
  if (data.size() == 0) return 0.0;
  long double total = 0.0L;
  for (const Comparison& c : data.records()) {
    total -= log_sigmoid(candidate(c.prompt, c.winner) -
                         candidate(c.prompt, c.loser));
  }
  return static_cast<double>(total / static_cast<long double>(data.size()));
}

RewardFit fit_reward_mle(const ComparisonDataset& data,
                         const RewardFitConfig& config) {
  const auto& sizes = data.responses_per_prompt();
  PairWeights weights(sizes.size());
  for (std::size_t x = 0; x < sizes.size(); ++x) {
    weights[x].assign(sizes[x], std::vector<double>(sizes[x], 0.0));
  }
  std::vector<std::vector<bool>> seen(sizes.size());
  for (std::size_t x = 0; x < sizes.size(); ++x) seen[x].assign(sizes[x], false);
  const double unit = data.size() ? 1.0 / static_cast<double>(data.size()) : 0.0;
  for (const Comparison& c : data.records()) {
    weights[c.prompt][c.winner][c.loser] += unit;
    seen[c.prompt][c.winner] = true;
    seen[c.prompt][c.loser] = true;
  }
  RewardFit fit = descend(weights, config);
  for (std::size_t x = 0; x < sizes.size(); ++x) {
    for (std::size_t y = 0; y < sizes[x]; ++y) {
      if (!seen[x][y]) fit.unidentified.emplace_back(x, y);
    }
  }
  return fit;
}

RewardFit fit_reward_population(const std::vector<PairwiseMatrix>& pair_probs,
                                const RewardFitConfig& config) {
  PairWeights weights(pair_probs.size());
  for (std::size_t x = 0; x < pair_probs.size(); ++x) {
    const auto& p = pair_probs[x];
    const std::size_t k = p.size();
    if (k < 2) throw ContractError("fit_reward_population: fewer than 2 responses");
    const double pair_weight =
        2.0 / (static_cast<double>(k) * static_cast<double>(k - 1) *
               static_cast<double>(pair_probs.size()));
    weights[x].assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
      if (p[i].size() != k) throw ContractError("fit_reward_population: ragged matrix");
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        const double v = p[i][j];
        if (!(v > 0.0 && v < 1.0)) {
          throw DomainError("fit_reward_population: probabilities must lie in (0,1)");
        }
        if (std::fabs(v + p[j][i] - 1.0) > 1e-12) {
          throw DomainError("fit_reward_population: p(i>j) + p(j>i) != 1 at prompt " +
                            std::to_string(x));
        }
        weights[x][i][j] = pair_weight * v;
      }
    }
  }
  RewardFit fit = descend(weights, config);
  double residual = 0.0;
  for (std::size_t x = 0; x < pair_probs.size(); ++x) {
    const auto row = fit.rewards.row(x);
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (i == j) continue;
        residual = std::max(residual,
                            std::fabs(sigmoid(row[i] - row[j]) - pair_probs[x][i][j]));
      }
    }
  }
  fit.max_probability_residual = residual;
  fit.realizable = residual <= kRealizableTolerance;
  return fit;
}

std::vector<PairwiseMatrix> pairwise_preferences(const RewardTable& rewards) {
  std::vector<PairwiseMatrix> out(rewards.num_prompts());
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const auto r = rewards.row(x);
    out[x].assign(r.size(), std::vector<double>(r.size(), 0.5));
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (i != j) out[x][i][j] = sigmoid(r[i] - r[j]);
      }
    }
  }
  return out;
}

}  // namespace pmrlhf
