#pragma once

// Finite-space preference models: Bradley-Terry-Luce pairwise choice,
// Plackett-Luce rankings, and the preference-matching policy softmax(r).
//
// Prompts and responses are dense 0-based indices. Every type here is
// immutable after construction.

#include <cstddef>
#include <span>
#include <vector>

namespace pmrlhf {

// Reward r(x, y) on a finite prompt x response grid. Each prompt may have its
// own number of responses k(x) >= 2; all values are finite.
class RewardTable {
 public:
  explicit RewardTable(std::vector<std::vector<double>> rows);

  std::size_t num_prompts() const { return rows_.size(); }
  std::size_t num_responses(std::size_t prompt) const;
  std::span<const double> row(std::size_t prompt) const;
  double operator()(std::size_t prompt, std::size_t response) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  // Same table with every value multiplied by `factor` (used for r / beta).
  RewardTable scaled(double factor) const;
  // Same table with `offset[x]` added to every entry of row x.
  RewardTable shifted(std::span<const double> offset) const;

 private:
  std::vector<std::vector<double>> rows_;
};

// pi(y|x) as one probability row per prompt. Entries are nonnegative and each
// row sums to 1 within 1e-12. Linear probabilities are stored together with
// log-probabilities; when a policy is built from log-probabilities those are
// kept verbatim and are authoritative (products over long token sequences).
class TabularPolicy {
 public:
  // Validates the rows as given.
  explicit TabularPolicy(std::vector<std::vector<double>> rows);
  // Divides each row by its sum before validating.
  static TabularPolicy normalized(std::vector<std::vector<double>> rows);
  // Rows of log-probabilities (-inf allowed for zero mass).
  static TabularPolicy from_log_probs(std::vector<std::vector<double>> log_rows);
  static TabularPolicy uniform(std::span<const std::size_t> sizes);

  std::size_t num_prompts() const { return rows_.size(); }
  std::size_t num_responses(std::size_t prompt) const;
  std::span<const double> row(std::size_t prompt) const;
  std::span<const double> log_row(std::size_t prompt) const;
  double operator()(std::size_t prompt, std::size_t response) const;
  double log_prob(std::size_t prompt, std::size_t response) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  std::vector<std::size_t> sizes() const;

 private:
  TabularPolicy() = default;
  void validate() const;

  std::vector<std::vector<double>> rows_;
  std::vector<std::vector<double>> log_rows_;
};

// A ranking of k items: order()[i] is the item placed at rank i (0 = best).
class RankingPermutation {
 public:
  explicit RankingPermutation(std::vector<std::size_t> order);
  static RankingPermutation identity(std::size_t k);

  std::size_t size() const { return order_.size(); }
  std::size_t operator[](std::size_t rank) const { return order_[rank]; }
  std::span<const std::size_t> order() const { return order_; }

 private:
  std::vector<std::size_t> order_;
};

// exp(r1) / (exp(r1) + exp(r2)). Throws DomainError on non-finite input.
double btl_preference(double r1, double r2);

// Plackett-Luce probability of the ranking `tau` under rewards `reward_row`:
// prod_i exp(r_tau(i)) / sum_{j >= i} exp(r_tau(j)).
double pl_ranking_prob(std::span<const double> reward_row,
                       const RankingPermutation& tau);

// Row-wise softmax of the reward table; the unique policy whose pairwise
// conditionals equal the BTL preferences of the reward.
TabularPolicy pm_policy(const RewardTable& rewards);

// pi(y_i|x) / (pi(y_i|x) + pi(y_j|x)); UndefinedConditionalError when both are 0.
double conditional_preference(const TabularPolicy& policy, std::size_t prompt,
                              std::size_t i, std::size_t j);

// Point mass on the highest-reward response of each prompt (lowest index on
// ties).
TabularPolicy argmax_point_mass(const RewardTable& rewards);

}  // namespace pmrlhf
