#include "pmrlhf/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"

namespace pmrlhf {
namespace {

constexpr double kRowSumTolerance = 1e-12;

void check_prompt(std::size_t prompt, std::size_t count, const char* where) {
  if (prompt >= count) {
    throw ContractError(std::string(where) + ": prompt index " +
                        std::to_string(prompt) + " out of range");
  }
}

}  // namespace

RewardTable::RewardTable(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  for (std::size_t x = 0; x < rows_.size(); ++x) {
    if (rows_[x].size() < 2) {
      throw ContractError("RewardTable: prompt " + std::to_string(x) +
                          " has fewer than 2 responses");
    }
    for (double v : rows_[x]) {
      if (!std::isfinite(v)) {
        throw DomainError("RewardTable: non-finite reward at prompt " +
                          std::to_string(x));
      }
    }
  }
}

std::size_t RewardTable::num_responses(std::size_t prompt) const {
  check_prompt(prompt, rows_.size(), "RewardTable");
  return rows_[prompt].size();
}

std::span<const double> RewardTable::row(std::size_t prompt) const {
  check_prompt(prompt, rows_.size(), "RewardTable");
  return rows_[prompt];
}

double RewardTable::operator()(std::size_t prompt, std::size_t response) const {
  check_prompt(prompt, rows_.size(), "RewardTable");
  if (response >= rows_[prompt].size()) {
    throw ContractError("RewardTable: response index out of range");
  }
  return rows_[prompt][response];
}

RewardTable RewardTable::scaled(double factor) const {
  auto rows = rows_;
  for (auto& r : rows)
    for (double& v : r) v *= factor;
  return RewardTable(std::move(rows));
}

RewardTable RewardTable::shifted(std::span<const double> offset) const {
  if (offset.size() != rows_.size()) {
    throw ContractError("RewardTable::shifted: one offset per prompt required");
  }
  auto rows = rows_;
  for (std::size_t x = 0; x < rows.size(); ++x)
    for (double& v : rows[x]) v += offset[x];
  return RewardTable(std::move(rows));
}

TabularPolicy::TabularPolicy(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  log_rows_.resize(rows_.size());
  for (std::size_t x = 0; x < rows_.size(); ++x) {
    log_rows_[x].resize(rows_[x].size());
    for (std::size_t y = 0; y < rows_[x].size(); ++y) {
      log_rows_[x][y] = std::log(rows_[x][y]);
    }
  }
  validate();
}

TabularPolicy TabularPolicy::normalized(std::vector<std::vector<double>> rows) {
  for (std::size_t x = 0; x < rows.size(); ++x) {
    const double total = accurate_sum(rows[x]);
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DomainError("TabularPolicy::normalized: row " + std::to_string(x) +
                        " has no positive mass");
    }
    for (double& v : rows[x]) v /= total;
  }
  return TabularPolicy(std::move(rows));
}

TabularPolicy TabularPolicy::from_log_probs(
    std::vector<std::vector<double>> log_rows) {
  TabularPolicy p;
  p.rows_.resize(log_rows.size());
  for (std::size_t x = 0; x < log_rows.size(); ++x) {
    p.rows_[x].resize(log_rows[x].size());
    for (std::size_t y = 0; y < log_rows[x].size(); ++y) {
      p.rows_[x][y] = std::exp(log_rows[x][y]);
    }
  }
  p.log_rows_ = std::move(log_rows);
  p.validate();
  return p;
}

TabularPolicy TabularPolicy::uniform(std::span<const std::size_t> sizes) {
  std::vector<std::vector<double>> rows;
  rows.reserve(sizes.size());
  for (std::size_t k : sizes) {
    if (k == 0) throw ContractError("TabularPolicy::uniform: empty row");
    rows.emplace_back(k, 1.0 / static_cast<double>(k));
  }
  return TabularPolicy(std::move(rows));
}

void TabularPolicy::validate() const {
  for (std::size_t x = 0; x < rows_.size(); ++x) {
    if (rows_[x].empty()) {
      throw ContractError("TabularPolicy: prompt " + std::to_string(x) +
                          " has no responses");
    }
    for (double v : rows_[x]) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw DomainError("TabularPolicy: invalid probability at prompt " +
                          std::to_string(x));
      }
    }
    const double total = accurate_sum(rows_[x]);
    if (std::fabs(total - 1.0) > kRowSumTolerance) {
      throw DomainError("TabularPolicy: row " + std::to_string(x) +
                        " sums to " + std::to_string(total));
    }
  }
}

std::size_t TabularPolicy::num_responses(std::size_t prompt) const {
  check_prompt(prompt, rows_.size(), "TabularPolicy");
  return rows_[prompt].size();
}

std::span<const double> TabularPolicy::row(std::size_t prompt) const {
  check_prompt(prompt, rows_.size(), "TabularPolicy");
  return rows_[prompt];
}

std::span<const double> TabularPolicy::log_row(std::size_t prompt) const {
  check_prompt(prompt, rows_.size(), "TabularPolicy");
  return log_rows_[prompt];
}

double TabularPolicy::operator()(std::size_t prompt,
                                 std::size_t response) const {
  check_prompt(prompt, rows_.size(), "TabularPolicy");
  if (response >= rows_[prompt].size()) {
    throw ContractError("TabularPolicy: response index out of range");
  }
  return rows_[prompt][response];
}

double TabularPolicy::log_prob(std::size_t prompt, std::size_t response) const {
  check_prompt(prompt, rows_.size(), "TabularPolicy");
  if (response >= rows_[prompt].size()) {
    throw ContractError("TabularPolicy: response index out of range");
  }
  return log_rows_[prompt][response];
}

std::vector<std::size_t> TabularPolicy::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.size());
  return out;
}

RankingPermutation::RankingPermutation(std::vector<std::size_t> order)
    : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t item : order_) {
    if (item >= order_.size() || seen[item]) {
      throw ContractError("RankingPermutation: not a bijection");
    }
    seen[item] = true;
  }
}

RankingPermutation RankingPermutation::identity(std::size_t k) {
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  return RankingPermutation(std::move(order));
}

double btl_preference(double r1, double r2) {
  if (!std::isfinite(r1) || !std::isfinite(r2)) {
    throw DomainError("btl_preference: non-finite reward");
  }
  return sigmoid(r1 - r2);
}

double pl_ranking_prob(std::span<const double> reward_row,
                       const RankingPermutation& tau) {
  if (reward_row.size() != tau.size()) {
    throw ContractError("pl_ranking_prob: reward row and ranking differ in size");
  }
  const std::size_t k = tau.size();
  std::vector<double> ranked(k);
  for (std::size_t i = 0; i < k; ++i) ranked[i] = reward_row[tau[i]];
  // Accumulate in log space; the tail log-sum-exp is recomputed per stage.
  double log_p = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    log_p += ranked[i] - log_sum_exp(std::span(ranked).subspan(i));
  }
  return std::exp(log_p);
}

TabularPolicy pm_policy(const RewardTable& rewards) {
  std::vector<std::vector<double>> rows;
  rows.reserve(rewards.num_prompts());
  for (const auto& r : rewards.rows()) rows.push_back(softmax(r));
  return TabularPolicy(std::move(rows));
}

double conditional_preference(const TabularPolicy& policy, std::size_t prompt,
                              std::size_t i, std::size_t j) {
  const double pi = policy(prompt, i);
  const double pj = policy(prompt, j);
  if (pi + pj <= 0.0) {
    throw UndefinedConditionalError(
        "conditional_preference: both responses have zero probability");
  }
  return pi / (pi + pj);
}

TabularPolicy argmax_point_mass(const RewardTable& rewards) {
  std::vector<std::vector<double>> rows;
  rows.reserve(rewards.num_prompts());
  for (const auto& r : rewards.rows()) {
    std::vector<double> row(r.size(), 0.0);
    // max_element returns the first maximizer.
    row[static_cast<std::size_t>(std::max_element(r.begin(), r.end()) -
                                 r.begin())] = 1.0;
    rows.push_back(std::move(row));
  }
  return TabularPolicy(std::move(rows));
}

}  // namespace pmrlhf
