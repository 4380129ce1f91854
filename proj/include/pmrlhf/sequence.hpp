#pragma once

// Toy autoregressive policies over an enumerable response space.
//
// Token 0 is end-of-sequence (EOS); tokens 1..V-1 carry content. A response
// is a token sequence that ends with its only EOS and has at most L tokens,
// so there are sum_{l=1..L} (V-1)^(l-1) responses. When a history already
// holds L-1 content tokens the next token is EOS with probability 1,
// whatever the conditional table says.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmrlhf/preference.hpp"
#include "pmrlhf/regularizers.hpp"
#include "pmrlhf/rng.hpp"

namespace pmrlhf {

using Token = std::uint32_t;
using Response = std::vector<Token>;

inline constexpr Token kEos = 0;
inline constexpr std::size_t kMaxEnumeratedResponses = 1'000'000;

struct Vocabulary {
  std::size_t tokens = 2;      // V, including EOS
  std::size_t max_length = 1;  // L, including EOS

  // Number of EOS-terminated responses; saturates at SIZE_MAX.
  std::size_t response_count() const;
  // Throws ConfigError when V < 2, L < 1 or the enumeration bound is exceeded.
  void validate() const;
};

// All responses in lexicographic order (EOS sorts first).
std::vector<Response> enumerate_responses(const Vocabulary& vocab);

// Position of `response` in enumerate_responses(vocab), computed directly.
std::size_t response_index(const Vocabulary& vocab, std::span<const Token> response);

// Number of tokens excluding EOS.
inline std::size_t content_length(std::span<const Token> response) {
  return response.empty() ? 0 : response.size() - 1;
}

// Per-prompt next-token tables conditioned on the last `order` tokens of the
// history (left-padded with a begin marker, so short histories stay
// distinguishable).
class AutoregressivePolicy {
 public:
  // tables[x][c] is the next-token distribution for prompt x in context c;
  // there are (V+1)^order contexts per prompt.
  AutoregressivePolicy(Vocabulary vocab, std::size_t order,
                       std::vector<std::vector<std::vector<double>>> tables);

  static AutoregressivePolicy uniform(Vocabulary vocab, std::size_t order,
                                      std::size_t prompts);
  // Softmax of logits drawn as scale * N(0, 1).
  static AutoregressivePolicy random(Vocabulary vocab, std::size_t order,
                                     std::size_t prompts, double scale, Rng& rng);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t order() const { return order_; }
  std::size_t num_prompts() const { return tables_.size(); }
  std::size_t num_contexts() const;

  std::size_t context_of(std::span<const Token> history) const;
  // Effective next-token distribution after `history` (content tokens only):
  // a point mass on EOS once the history is L-1 tokens long.
  std::vector<double> next_token(std::size_t prompt,
                                 std::span<const Token> history) const;
  std::span<const double> table_row(std::size_t prompt, std::size_t context) const;
  const std::vector<std::vector<std::vector<double>>>& tables() const { return tables_; }

  Response sample(std::size_t prompt, Rng& rng) const;

 private:
  Vocabulary vocab_;
  std::size_t order_;
  std::vector<std::vector<std::vector<double>>> tables_;
};

// Per-token log-probabilities of the response (EOS included). Throws
// ContractError for malformed responses.
std::vector<double> token_log_probs(const AutoregressivePolicy& policy,
                                    std::size_t prompt,
                                    std::span<const Token> response);

// Sum of token_log_probs.
double seq_log_prob(const AutoregressivePolicy& policy, std::size_t prompt,
                    std::span<const Token> response);

// Row of exp(seq_log_prob) over enumerate_responses order.
TabularPolicy flatten_to_tabular(const AutoregressivePolicy& policy,
                                 std::size_t prompt);
// All prompts at once.
TabularPolicy flatten_to_tabular(const AutoregressivePolicy& policy);

// Moment matching: the order-m policy whose conditionals are the
// prefix-mass ratios of `target` (aggregated over histories sharing a
// context). Exact when order >= L - 1. Contexts with no mass get uniform rows.
AutoregressivePolicy fit_autoregressive(const TabularPolicy& target,
                                        const Vocabulary& vocab, std::size_t order);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count_ref = 0;
  std::size_t count_reward = 0;
};

struct CollapseHistogram {
  std::vector<HistogramBin> bins;  // 20 equal-width bins on [0, 1]
  std::vector<double> p_ref;       // p_ref(y1 | y1, y2, x) per pair
  std::vector<double> p_reward;    // p_reward(y1 | y1, y2, x) per pair
  double extreme_mass_ref = 0.0;   // fraction in [0, 0.05) or (0.95, 1]
  double central_mass_ref = 0.0;   // fraction in [0.45, 0.55]

  double extremity_gap() const { return extreme_mass_ref - central_mass_ref; }
};

inline constexpr std::size_t kHistogramBins = 20;

// Samples `pairs` (x, y1, y2) with x uniform and y1, y2 drawn independently
// from the reference, then bins p_ref(y1) and the BTL preference of the
// rewards (indexed by enumeration order) for the same pairs.
CollapseHistogram collapse_histogram(const AutoregressivePolicy& reference,
                                     const RewardTable& rewards, std::size_t pairs,
                                     std::uint64_t seed);

enum class ThresholdRule {
  kWholeResponse,        // pi_ref(y|x) >= alpha
  kPerTokenGeometric,    // pi_ref(y|x)^(1/len) >= alpha (extension)
};

// M(x) from a threshold on the reference's response probabilities.
RegularSet regular_set_from_threshold(const AutoregressivePolicy& reference,
                                      double alpha,
                                      ThresholdRule rule = ThresholdRule::kWholeResponse);

// E_x E_{y~pi}[ r_c - log pi 1(ref >= alpha) - log(pi/ref) 1(ref < alpha) ]
// with r_c = r - E_{x, y~ref}[r] (one unconditional centring constant).
double conditional_pm_objective_seq(const AutoregressivePolicy& policy,
                                    const AutoregressivePolicy& reference,
                                    const RewardTable& rewards, double alpha);

// Random reference policy and rewards over the enumerated responses.
struct SequenceScenario {
  Vocabulary vocab;
  std::size_t order = 1;
  AutoregressivePolicy reference;
  RewardTable rewards;
  std::vector<Response> responses;
};

SequenceScenario make_sequence_scenario(const Vocabulary& vocab, std::size_t order,
                                        std::size_t prompts, double reference_scale,
                                        double reward_scale, std::uint64_t seed);

}  // namespace pmrlhf
