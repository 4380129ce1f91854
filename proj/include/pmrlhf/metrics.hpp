#pragma once

// Evaluation metrics for aligned policies: PM divergence, entropy,
// KL-to-reference, perplexity and generation length.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pmrlhf/preference.hpp"
#include "pmrlhf/sequence.hpp"

namespace pmrlhf {

// A divergence value that may have been capped at kDivergenceCap.
struct CappedValue {
  double value = 0.0;
  bool capped = false;
};

// KL(p_llm || p_reward) between the two-point conditionals of a pair, with
// p_llm(y1) = p1 / (p1 + p2) and p_reward(y1) = sigmoid((r1 - r2) / beta).
CappedValue instance_pm_divergence(double p1, double p2, double r1, double r2,
                                   double beta);
// Same from log-probabilities (no underflow for long sequences).
CappedValue instance_pm_divergence_log(double log_p1, double log_p2, double r1,
                                       double r2, double beta);

enum class SamplingMode {
  kExact,       // enumerate all pairs, weighted by sampler probabilities
  kMonteCarlo,  // draw n (x, y1, y2) triples
};

inline constexpr std::size_t kMaxExactPairs = 10'000;

struct AggregateDivergence {
  double mean = 0.0;
  double sample_std = 0.0;         // Monte Carlo only
  std::vector<double> instances;   // per draw (MC) or per prompt (exact)
  std::size_t capped = 0;          // instances that hit the sentinel
  double win_rate = 0.0;           // p_llm and p_reward pick the same side
};

// E over x uniform and y1, y2 ~ sampler(.|x) independently of the instance
// divergence. The sampler defaults to the policy itself. Exact mode requires
// k(x)^2 <= 10^4 pairs per prompt.
AggregateDivergence aggregate_pm_divergence(const TabularPolicy& policy,
                                            const RewardTable& rewards, double beta,
                                            SamplingMode mode, std::size_t n,
                                            std::uint64_t seed,
                                            const TabularPolicy* sampler = nullptr);

// E_x[-sum_y pi log pi] with 0 log 0 = 0.
double entropy(const TabularPolicy& policy);

// E_x sum_y pi log(pi / pi_ref). Support violations give the capped sentinel.
CappedValue kl_to_reference(const TabularPolicy& policy, const TabularPolicy& reference);

// Mean over the evaluation set of exp(-log pi(y|x) / tokens(y)), where tokens
// counts EOS. A zero token probability gives the capped sentinel.
CappedValue perplexity(const AutoregressivePolicy& policy,
                       std::span<const std::pair<std::size_t, Response>> eval);

// Same expectation taken exactly over y ~ policy and x uniform.
CappedValue expected_perplexity(const AutoregressivePolicy& policy);

// Mean number of content tokens (EOS excluded).
double avg_length(std::span<const Response> responses);

// E_{x uniform, y ~ policy} content length over the enumerated responses.
double expected_length(const TabularPolicy& flat_policy,
                       std::span<const Response> responses);

struct MetricSamplerConfig {
  SamplingMode mode = SamplingMode::kExact;
  std::size_t pairs = 10'000;
  std::size_t responses = 10'000;  // Monte Carlo evaluation-set size
  std::uint64_t seed = 0;
};

struct MetricsReport {
  double pm_divergence = 0.0;
  double entropy = 0.0;
  double kl_to_ref = 0.0;
  double perplexity = 1.0;
  double avg_length = 0.0;
  double win_rate = 0.0;
  std::vector<double> pm_divergence_instances;
  std::size_t sentinel_count = 0;
};

// All metrics for a sequence policy. Pairs for the PM divergence are drawn
// from the policy under evaluation; the evaluation set for perplexity and
// length is the policy's own output (exactly, or n samples).
MetricsReport evaluate_sequence_policy(const AutoregressivePolicy& policy,
                                       const AutoregressivePolicy& reference,
                                       const RewardTable& rewards, double beta,
                                       const MetricSamplerConfig& config);

}  // namespace pmrlhf
