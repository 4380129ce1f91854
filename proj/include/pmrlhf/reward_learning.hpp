#pragma once

// Synthetic BTL comparison data and maximum-likelihood reward recovery.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pmrlhf/preference.hpp"

namespace pmrlhf {

struct Comparison {
  std::size_t prompt = 0;
  std::size_t winner = 0;
  std::size_t loser = 0;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct ComparisonMetadata {
  std::uint64_t seed = 0;
  std::string sampler_id = "uniform";
};

// Records (x, y_w, y_l) with y_w != y_l and indices inside k(x).
class ComparisonDataset {
 public:
  ComparisonDataset(std::vector<std::size_t> responses_per_prompt,
                    std::vector<Comparison> records,
                    ComparisonMetadata metadata = {});

  const std::vector<Comparison>& records() const { return records_; }
  const std::vector<std::size_t>& responses_per_prompt() const {
    return responses_per_prompt_;
  }
  const ComparisonMetadata& metadata() const { return metadata_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<std::size_t> responses_per_prompt_;
  std::vector<Comparison> records_;
  ComparisonMetadata metadata_;
};

enum class Normalization {
  kFirstResponseZero,  // r(x, y_1) = 0 per prompt
  kRowMeanZero,
};

struct RewardFitConfig {
  double step_size = 2.0;
  std::size_t max_iterations = 200000;
  double gradient_tolerance = 1e-10;
  Normalization normalization = Normalization::kFirstResponseZero;

  void validate() const;
};

struct RewardFit {
  RewardTable rewards;
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  // (prompt, response) pairs that never appear in any comparison.
  std::vector<std::pair<std::size_t, std::size_t>> unidentified;
  // Population fits only: false when the input matrix is not reproduced by
  // any BTL reward (max residual above kRealizableTolerance).
  bool realizable = true;
  double max_probability_residual = 0.0;
};

inline constexpr double kRealizableTolerance = 1e-6;

// Draws n labelled comparisons. Each record picks a prompt uniformly, a
// distinct pair from the sampler row (rejecting equal draws), and a winner
// with BTL probability under `true_rewards`.
ComparisonDataset generate_comparisons(const RewardTable& true_rewards,
                                       const TabularPolicy& sampler,
                                       std::size_t n, std::uint64_t seed,
                                       std::string sampler_id = "uniform");

// Mean over records of -log sigmoid(r(x, y_w) - r(x, y_l)).
double nll_loss(const RewardTable& candidate, const ComparisonDataset& data);

// Gradient descent on the tabular NLL.
RewardFit fit_reward_mle(const ComparisonDataset& data,
                         const RewardFitConfig& config = {});

// pair_probs[x][i][j] = P(y_i beats y_j | x); diagonal ignored.
using PairwiseMatrix = std::vector<std::vector<double>>;

// Minimizes the expected cross-entropy between the given pairwise
// probabilities and the BTL probabilities of the fitted reward, with every
// unordered pair weighted equally.
RewardFit fit_reward_population(const std::vector<PairwiseMatrix>& pair_probs,
                                const RewardFitConfig& config = {});

// BTL pairwise probabilities sigma(r_i - r_j) of every prompt.
std::vector<PairwiseMatrix> pairwise_preferences(const RewardTable& rewards);

}  // namespace pmrlhf
