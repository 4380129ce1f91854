#include "pmrlhf/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"

namespace pmrlhf {
namespace {

constexpr double kRowTolerance = 1e-12;

// S(d): responses in the subtree below a history of d content tokens.
std::vector<std::size_t> subtree_sizes(const Vocabulary& vocab) {
  const std::size_t L = vocab.max_length;
  std::vector<std::size_t> s(L, 1);
  for (std::size_t d = L - 1; d-- > 0;) s[d] = 1 + (vocab.tokens - 1) * s[d + 1];
  return s;
}

void enumerate_into(const Vocabulary& vocab, Response& prefix,
                    std::vector<Response>& out) {
  prefix.push_back(kEos);
  out.push_back(prefix);
  prefix.pop_back();
  if (prefix.size() + 1 >= vocab.max_length) return;
  for (Token t = 1; t < vocab.tokens; ++t) {
    prefix.push_back(t);
    enumerate_into(vocab, prefix, out);
    prefix.pop_back();
  }
}

void check_response(const Vocabulary& vocab, std::span<const Token> response) {
  if (response.empty() || response.back() != kEos) {
    throw ContractError("response must end with EOS");
  }
  if (response.size() > vocab.max_length) {
    throw ContractError("response longer than the maximum length");
  }
  for (std::size_t i = 0; i + 1 < response.size(); ++i) {
    if (response[i] == kEos || response[i] >= vocab.tokens) {
      throw ContractError("response has an invalid content token at position " +
                          std::to_string(i));
    }
  }
}

}  // namespace

std::size_t Vocabulary::response_count() const {
  if (tokens < 2 || max_length < 1) return 0;
  const std::size_t branch = tokens - 1;
  std::size_t total = 0;
  std::size_t level = 1;
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  for (std::size_t l = 1; l <= max_length; ++l) {
    if (total > kMax - level) return kMax;
    total += level;
    if (l < max_length) {
      if (level > kMax / branch) return kMax;
      level *= branch;
    }
  }
  return total;
}

void Vocabulary::validate() const {
  if (tokens < 2) throw ConfigError("vocabulary needs at least 2 tokens (EOS + content)");
  if (max_length < 1) throw ConfigError("max length must be at least 1");
  const std::size_t count = response_count();
  if (count > kMaxEnumeratedResponses) {
    throw ConfigError("response space has " +
                      (count == std::numeric_limits<std::size_t>::max()
                           ? std::string("more than 2^64")
                           : std::to_string(count)) +
                      " responses, above the enumeration bound of " +
                      std::to_string(kMaxEnumeratedResponses));
  }
}

std::vector<Response> enumerate_responses(const Vocabulary& vocab) {
  vocab.validate();
  std::vector<Response> out;
  out.reserve(vocab.response_count());
  Response prefix;
  enumerate_into(vocab, prefix, out);
  return out;
}

std::size_t response_index(const Vocabulary& vocab, std::span<const Token> response) {
  check_response(vocab, response);
  const auto sizes = subtree_sizes(vocab);
  std::size_t index = 0;
  for (std::size_t i = 0; i + 1 < response.size(); ++i) {
    index += 1 + (response[i] - 1) * sizes[i + 1];
  }
  return index;
}

AutoregressivePolicy::AutoregressivePolicy(
    Vocabulary vocab, std::size_t order,
    std::vector<std::vector<std::vector<double>>> tables)
    : vocab_(vocab), order_(order), tables_(std::move(tables)) {
  vocab_.validate();
  const std::size_t contexts = num_contexts();
  for (std::size_t x = 0; x < tables_.size(); ++x) {
    if (tables_[x].size() != contexts) {
      throw ContractError("AutoregressivePolicy: prompt " + std::to_string(x) +
                          " needs " + std::to_string(contexts) + " context rows");
    }
    for (const auto& row : tables_[x]) {
      if (row.size() != vocab_.tokens) {
        throw ContractError("AutoregressivePolicy: conditional row has the wrong length");
      }
      for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw DomainError("AutoregressivePolicy: invalid conditional probability");
        }
      }
      if (std::fabs(accurate_sum(row) - 1.0) > kRowTolerance) {
        throw DomainError("AutoregressivePolicy: conditional row does not sum to 1");
      }
    }
  }
}

std::size_t AutoregressivePolicy::num_contexts() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < order_; ++i) {
    if (n > kMaxEnumeratedResponses) {
      throw ConfigError("AutoregressivePolicy: Markov order too large for the vocabulary");
    }
    n *= vocab_.tokens + 1;
  }
  return n;
}

AutoregressivePolicy AutoregressivePolicy::uniform(Vocabulary vocab, std::size_t order,
                                                   std::size_t prompts) {
  vocab.validate();
  std::size_t contexts = 1;
  for (std::size_t i = 0; i < order; ++i) contexts *= vocab.tokens + 1;
  const std::vector<double> row(vocab.tokens, 1.0 / static_cast<double>(vocab.tokens));
  return AutoregressivePolicy(
      vocab, order,
      std::vector<std::vector<std::vector<double>>>(
          prompts, std::vector<std::vector<double>>(contexts, row)));
}

AutoregressivePolicy AutoregressivePolicy::random(Vocabulary vocab, std::size_t order,
                                                  std::size_t prompts, double scale,
                                                  Rng& rng) {
  vocab.validate();
  std::size_t contexts = 1;
  for (std::size_t i = 0; i < order; ++i) contexts *= vocab.tokens + 1;
  std::vector<std::vector<std::vector<double>>> tables(prompts);
  std::vector<double> logits(vocab.tokens);
  for (auto& prompt_tables : tables) {
    prompt_tables.resize(contexts);
    for (auto& row : prompt_tables) {
      for (double& z : logits) z = scale * rng.normal();
      row = softmax(logits);
    }
  }
  return AutoregressivePolicy(vocab, order, std::move(tables));
}

std::size_t AutoregressivePolicy::context_of(std::span<const Token> history) const {
  const std::size_t base = vocab_.tokens + 1;
  const Token bos = static_cast<Token>(vocab_.tokens);
  std::size_t index = 0;
  for (std::size_t i = 0; i < order_; ++i) {
    // i-th most recent token, or the begin marker.
    const Token t = i < history.size() ? history[history.size() - 1 - i] : bos;
    index = index * base + t;
  }
  return index;
}

std::vector<double> AutoregressivePolicy::next_token(
    std::size_t prompt, std::span<const Token> history) const {
  if (history.size() + 1 >= vocab_.max_length) {
    std::vector<double> eos(vocab_.tokens, 0.0);
    eos[kEos] = 1.0;
    return eos;
  }
  const auto row = table_row(prompt, context_of(history));
  return {row.begin(), row.end()};
}

std::span<const double> AutoregressivePolicy::table_row(std::size_t prompt,
                                                        std::size_t context) const {
  return tables_.at(prompt).at(context);
}

Response AutoregressivePolicy::sample(std::size_t prompt, Rng& rng) const {
  Response out;
  while (true) {
    const auto row = next_token(prompt, out);
    const Token t = static_cast<Token>(rng.categorical(row));
    out.push_back(t);
    if (t == kEos) return out;
  }
}

std::vector<double> token_log_probs(const AutoregressivePolicy& policy,
                                    std::size_t prompt,
                                    std::span<const Token> response) {
  check_response(policy.vocab(), response);
  std::vector<double> out(response.size());
  for (std::size_t i = 0; i < response.size(); ++i) {
    const auto row = policy.next_token(prompt, response.first(i));
    out[i] = std::log(row[response[i]]);
  }
  return out;
}

double seq_log_prob(const AutoregressivePolicy& policy, std::size_t prompt,
                    std::span<const Token> response) {
  const auto parts = token_log_probs(policy, prompt, response);
  return accurate_sum(parts);
}

TabularPolicy flatten_to_tabular(const AutoregressivePolicy& policy,
                                 std::size_t prompt) {
  const auto responses = enumerate_responses(policy.vocab());
  std::vector<double> logs(responses.size());
  for (std::size_t y = 0; y < responses.size(); ++y) {
    logs[y] = seq_log_prob(policy, prompt, responses[y]);
  }
  return TabularPolicy::from_log_probs({std::move(logs)});
}

TabularPolicy flatten_to_tabular(const AutoregressivePolicy& policy) {
  const auto responses = enumerate_responses(policy.vocab());
  std::vector<std::vector<double>> logs(policy.num_prompts(),
                                        std::vector<double>(responses.size()));
  for (std::size_t x = 0; x < policy.num_prompts(); ++x) {
    for (std::size_t y = 0; y < responses.size(); ++y) {
      logs[x][y] = seq_log_prob(policy, x, responses[y]);
    }
  }
  return TabularPolicy::from_log_probs(std::move(logs));
}

AutoregressivePolicy fit_autoregressive(const TabularPolicy& target,
                                        const Vocabulary& vocab, std::size_t order) {
  const auto responses = enumerate_responses(vocab);
  AutoregressivePolicy shape = AutoregressivePolicy::uniform(vocab, order, 1);
  const std::size_t contexts = shape.num_contexts();
  std::vector<std::vector<std::vector<double>>> tables(target.num_prompts());
  for (std::size_t x = 0; x < target.num_prompts(); ++x) {
    if (target.num_responses(x) != responses.size()) {
      throw ContractError("fit_autoregressive: target row does not cover the response space");
    }
    std::vector<std::vector<long double>> mass(contexts,
                                               std::vector<long double>(vocab.tokens, 0.0L));
    const auto row = target.row(x);
    for (std::size_t y = 0; y < responses.size(); ++y) {
      if (row[y] == 0.0) continue;
      const Response& r = responses[y];
      for (std::size_t i = 0; i < r.size() && i + 1 < vocab.max_length; ++i) {
        mass[shape.context_of(std::span(r).first(i))][r[i]] += row[y];
      }
    }
    tables[x].resize(contexts);
    for (std::size_t c = 0; c < contexts; ++c) {
      long double total = 0.0L;
      for (long double m : mass[c]) total += m;
      auto& out = tables[x][c];
      out.resize(vocab.tokens);
      if (total <= 0.0L) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(vocab.tokens));
      } else {
        for (std::size_t t = 0; t < vocab.tokens; ++t) {
          out[t] = static_cast<double>(mass[c][t] / total);
        }
      }
    }
  }
  return AutoregressivePolicy(vocab, order, std::move(tables));
}

CollapseHistogram collapse_histogram(const AutoregressivePolicy& reference,
                                     const RewardTable& rewards, std::size_t pairs,
                                     std::uint64_t seed) {
  const Vocabulary& vocab = reference.vocab();
  if (rewards.num_prompts() != reference.num_prompts()) {
    throw ContractError("collapse_histogram: reward/reference prompt mismatch");
  }
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    if (rewards.num_responses(x) != vocab.response_count()) {
      throw ContractError("collapse_histogram: rewards must cover every response");
    }
  }
  CollapseHistogram out;
  out.bins.resize(kHistogramBins);
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    out.bins[b].lo = static_cast<double>(b) / kHistogramBins;
    out.bins[b].hi = static_cast<double>(b + 1) / kHistogramBins;
  }
  auto bin_of = [](double v) {
    return std::min<std::size_t>(kHistogramBins - 1,
                                 static_cast<std::size_t>(v * kHistogramBins));
  };
  Rng rng = Rng::substream(seed, "collapse_pairs");
  std::size_t extreme = 0;
  std::size_t central = 0;
  out.p_ref.reserve(pairs);
  out.p_reward.reserve(pairs);
  for (std::size_t n = 0; n < pairs; ++n) {
    const std::size_t x = rng.index(reference.num_prompts());
    const Response y1 = reference.sample(x, rng);
    const Response y2 = reference.sample(x, rng);
    const double p_ref = sigmoid(seq_log_prob(reference, x, y1) -
                                 seq_log_prob(reference, x, y2));
    const double p_reward = btl_preference(rewards(x, response_index(vocab, y1)),
                                           rewards(x, response_index(vocab, y2)));
    out.p_ref.push_back(p_ref);
    out.p_reward.push_back(p_reward);
    ++out.bins[bin_of(p_ref)].count_ref;
    ++out.bins[bin_of(p_reward)].count_reward;
    if (p_ref < 0.05 || p_ref > 0.95) ++extreme;
    if (p_ref >= 0.45 && p_ref <= 0.55) ++central;
  }
  if (pairs > 0) {
    out.extreme_mass_ref = static_cast<double>(extreme) / static_cast<double>(pairs);
    out.central_mass_ref = static_cast<double>(central) / static_cast<double>(pairs);
  }
  return out;
}

RegularSet regular_set_from_threshold(const AutoregressivePolicy& reference,
                                      double alpha, ThresholdRule rule) {
  const TabularPolicy flat = flatten_to_tabular(reference);
  if (rule == ThresholdRule::kWholeResponse) {
    return RegularSet::from_threshold(flat, alpha);
  }
  const auto responses = enumerate_responses(reference.vocab());
  std::vector<std::vector<std::uint8_t>> mask(flat.num_prompts());
  for (std::size_t x = 0; x < flat.num_prompts(); ++x) {
    mask[x].resize(responses.size());
    double best = 0.0;
    for (std::size_t y = 0; y < responses.size(); ++y) {
      const double per_token =
          std::exp(flat.log_prob(x, y) / static_cast<double>(responses[y].size()));
      best = std::max(best, per_token);
      mask[x][y] = (alpha <= 0.0 || per_token >= alpha) ? 1 : 0;
    }
    if (std::none_of(mask[x].begin(), mask[x].end(), [](auto m) { return m != 0; })) {
      throw ConfigError("per-token threshold " + std::to_string(alpha) +
                        " exceeds the largest per-token probability " +
                        std::to_string(best) + " at prompt " + std::to_string(x));
    }
  }
  return RegularSet(std::move(mask), RegularSet::Threshold{alpha});
}

double conditional_pm_objective_seq(const AutoregressivePolicy& policy,
                                    const AutoregressivePolicy& reference,
                                    const RewardTable& rewards, double alpha) {
  const TabularPolicy pi = flatten_to_tabular(policy);
  const TabularPolicy ref = flatten_to_tabular(reference);
  if (pi.num_prompts() != rewards.num_prompts() ||
      ref.num_prompts() != rewards.num_prompts()) {
    throw ContractError("conditional_pm_objective_seq: prompt count mismatch");
  }
  const double offset = unconditional_mean_offset(rewards, ref);
  long double total = 0.0L;
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const auto r = rewards.row(x);
    if (r.size() != pi.num_responses(x)) {
      throw ContractError("conditional_pm_objective_seq: rewards must cover every response");
    }
    long double value = 0.0L;
    for (std::size_t y = 0; y < r.size(); ++y) {
      const double p = pi(x, y);
      if (p == 0.0) continue;
      const bool regular = alpha <= 0.0 || ref(x, y) >= alpha;
      double penalty = pi.log_prob(x, y);
      if (!regular) {
        if (!(ref(x, y) > 0.0)) {
          throw DomainError("conditional_pm_objective_seq: zero reference mass off the regular set");
        }
        penalty -= ref.log_prob(x, y);
      }
      value += p * (r[y] + offset - penalty);
    }
    total += value;
  }
  return static_cast<double>(total / rewards.num_prompts());
}

SequenceScenario make_sequence_scenario(const Vocabulary& vocab, std::size_t order,
                                        std::size_t prompts, double reference_scale,
                                        double reward_scale, std::uint64_t seed) {
  vocab.validate();
  Rng ref_rng = Rng::substream(seed, "sequence_reference");
  AutoregressivePolicy reference =
      AutoregressivePolicy::random(vocab, order, prompts, reference_scale, ref_rng);
  auto responses = enumerate_responses(vocab);
  Rng reward_rng = Rng::substream(seed, "sequence_rewards");
  std::vector<std::vector<double>> rows(prompts, std::vector<double>(responses.size()));
  for (auto& row : rows)
    for (double& v : row) v = reward_scale * reward_rng.normal();
  return {vocab, order, std::move(reference), RewardTable(std::move(rows)),
          std::move(responses)};
}

}  // namespace pmrlhf
