#include "pmrlhf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"
#include "pmrlhf/rng.hpp"

namespace pmrlhf {
namespace {

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

CappedValue cap(double v) {
  if (!std::isfinite(v) || v > kDivergenceCap) return {kDivergenceCap, true};
  return {v, false};
}

bool same_side(double u, double v) {
  auto sign = [](double t) { return (t > 0.0) - (t < 0.0); };
  return sign(u) == sign(v);
}

}  // namespace

CappedValue instance_pm_divergence_log(double log_p1, double log_p2, double r1,
                                       double r2, double beta) {
  if (!(beta > 0.0)) throw DomainError("instance_pm_divergence: beta must be > 0");
  const double inf = std::numeric_limits<double>::infinity();
  if (log_p1 == -inf && log_p2 == -inf) {
    throw UndefinedConditionalError("instance_pm_divergence: both responses have zero probability");
  }
  // Two-point KL in log-odds form:
  //   KL(Bern(sigmoid(u)) || Bern(sigmoid(v))) = q (u - v) + softplus(v) - softplus(u).
  const double v = (r1 - r2) / beta;
  if (log_p2 == -inf) return cap(softplus(-v));
  if (log_p1 == -inf) return cap(softplus(v));
  const double u = log_p1 - log_p2;
  const double q = sigmoid(u);
  return cap(std::max(0.0, q * (u - v) + softplus(v) - softplus(u)));
}

CappedValue instance_pm_divergence(double p1, double p2, double r1, double r2,
                                   double beta) {
  if (!(p1 >= 0.0) || !(p2 >= 0.0)) {
    throw DomainError("instance_pm_divergence: negative probability");
  }
  return instance_pm_divergence_log(std::log(p1), std::log(p2), r1, r2, beta);
}

AggregateDivergence aggregate_pm_divergence(const TabularPolicy& policy,
                                            const RewardTable& rewards, double beta,
                                            SamplingMode mode, std::size_t n,
                                            std::uint64_t seed,
                                            const TabularPolicy* sampler) {
  if (!sampler) sampler = &policy;
  const std::size_t prompts = rewards.num_prompts();
  if (policy.num_prompts() != prompts || sampler->num_prompts() != prompts) {
    throw ContractError("aggregate_pm_divergence: prompt count mismatch");
  }
  AggregateDivergence out;
  if (mode == SamplingMode::kExact) {
    long double total = 0.0L;
    long double wins = 0.0L;
    for (std::size_t x = 0; x < prompts; ++x) {
      const std::size_t k = rewards.num_responses(x);
      if (k * k > kMaxExactPairs) {
        throw ConfigError("aggregate_pm_divergence: exact mode needs at most " +
                          std::to_string(kMaxExactPairs) + " pairs per prompt");
      }
      const auto s = sampler->row(x);
      const auto r = rewards.row(x);
      long double prompt_total = 0.0L;
      for (std::size_t i = 0; i < k; ++i) {
        if (s[i] == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
          if (s[j] == 0.0) continue;
          const double w = s[i] * s[j];
          const auto d = instance_pm_divergence_log(policy.log_prob(x, i),
                                                    policy.log_prob(x, j), r[i], r[j], beta);
          if (d.capped) ++out.capped;
          prompt_total += w * d.value;
          if (same_side(policy.log_prob(x, i) - policy.log_prob(x, j), r[i] - r[j])) {
            wins += w;
          }
        }
      }
      out.instances.push_back(static_cast<double>(prompt_total));
      total += prompt_total;
    }
    out.mean = static_cast<double>(total / prompts);
    out.win_rate = static_cast<double>(wins / prompts);
    return out;
  }

  if (n == 0) throw ContractError("aggregate_pm_divergence: n must be positive");
  Rng rng = Rng::substream(seed, "pm_divergence_pairs");
  out.instances.reserve(n);
  std::size_t wins = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t x = rng.index(prompts);
    const auto s = sampler->row(x);
    const std::size_t i = rng.categorical(s);
    const std::size_t j = rng.categorical(s);
    const auto d = instance_pm_divergence_log(policy.log_prob(x, i), policy.log_prob(x, j),
                                              rewards(x, i), rewards(x, j), beta);
    if (d.capped) ++out.capped;
    out.instances.push_back(d.value);
    if (same_side(policy.log_prob(x, i) - policy.log_prob(x, j),
                  rewards(x, i) - rewards(x, j))) {
      ++wins;
    }
  }
  out.mean = accurate_sum(out.instances) / static_cast<double>(n);
  if (n > 1) {
    long double ss = 0.0L;
    for (double v : out.instances) ss += (v - out.mean) * (v - out.mean);
    out.sample_std = std::sqrt(static_cast<double>(ss / (n - 1)));
  }
  out.win_rate = static_cast<double>(wins) / static_cast<double>(n);
  return out;
}

double entropy(const TabularPolicy& policy) {
  if (policy.num_prompts() == 0) return 0.0;
  long double total = 0.0L;
  for (std::size_t x = 0; x < policy.num_prompts(); ++x) {
    const auto p = policy.row(x);
    const auto lp = policy.log_row(x);
    for (std::size_t y = 0; y < p.size(); ++y) {
      if (p[y] > 0.0) total -= p[y] * lp[y];
    }
  }
  return static_cast<double>(total / policy.num_prompts());
}

CappedValue kl_to_reference(const TabularPolicy& policy, const TabularPolicy& reference) {
  if (policy.num_prompts() != reference.num_prompts()) {
    throw ContractError("kl_to_reference: prompt count mismatch");
  }
  if (policy.num_prompts() == 0) return {0.0, false};
  long double total = 0.0L;
  for (std::size_t x = 0; x < policy.num_prompts(); ++x) {
    if (policy.num_responses(x) != reference.num_responses(x)) {
      throw ContractError("kl_to_reference: row length mismatch");
    }
    const auto p = policy.row(x);
    for (std::size_t y = 0; y < p.size(); ++y) {
      if (p[y] == 0.0) continue;
      if (reference(x, y) == 0.0) return {kDivergenceCap, true};
      total += p[y] * (policy.log_prob(x, y) - reference.log_prob(x, y));
    }
  }
  return cap(static_cast<double>(total / policy.num_prompts()));
}

CappedValue perplexity(const AutoregressivePolicy& policy,
                       std::span<const std::pair<std::size_t, Response>> eval) {
  if (eval.empty()) throw ContractError("perplexity: empty evaluation set");
  long double total = 0.0L;
  for (const auto& [prompt, response] : eval) {
    const double lp = seq_log_prob(policy, prompt, response);
    if (!std::isfinite(lp)) return {kDivergenceCap, true};
    total += std::exp(-lp / static_cast<double>(response.size()));
  }
  return cap(static_cast<double>(total / eval.size()));
}

CappedValue expected_perplexity(const AutoregressivePolicy& policy) {
  const auto responses = enumerate_responses(policy.vocab());
  if (policy.num_prompts() == 0) throw ContractError("expected_perplexity: no prompts");
  long double total = 0.0L;
  for (std::size_t x = 0; x < policy.num_prompts(); ++x) {
    for (const Response& y : responses) {
      const double lp = seq_log_prob(policy, x, y);
      if (!std::isfinite(lp)) continue;  // never sampled
      total += std::exp(lp) * std::exp(-lp / static_cast<double>(y.size()));
    }
  }
  return cap(static_cast<double>(total / policy.num_prompts()));
}

double avg_length(std::span<const Response> responses) {
  if (responses.empty()) throw ContractError("avg_length: empty sample");
  long double total = 0.0L;
  for (const Response& r : responses) total += content_length(r);
  return static_cast<double>(total / responses.size());
}

double expected_length(const TabularPolicy& flat_policy,
                       std::span<const Response> responses) {
  if (flat_policy.num_prompts() == 0) return 0.0;
  long double total = 0.0L;
  for (std::size_t x = 0; x < flat_policy.num_prompts(); ++x) {
    const auto p = flat_policy.row(x);
    if (p.size() != responses.size()) {
      throw ContractError("expected_length: policy row does not match the response list");
    }
    for (std::size_t y = 0; y < p.size(); ++y) total += p[y] * content_length(responses[y]);
  }
  return static_cast<double>(total / flat_policy.num_prompts());
}

MetricsReport evaluate_sequence_policy(const AutoregressivePolicy& policy,
                                       const AutoregressivePolicy& reference,
                                       const RewardTable& rewards, double beta,
                                       const MetricSamplerConfig& config) {
  const TabularPolicy flat = flatten_to_tabular(policy);
  const TabularPolicy ref = flatten_to_tabular(reference);
  const auto responses = enumerate_responses(policy.vocab());

  MetricsReport report;
  const auto divergence = aggregate_pm_divergence(flat, rewards, beta, config.mode,
                                                  config.pairs, config.seed);
  report.pm_divergence = divergence.mean;
  report.pm_divergence_instances = divergence.instances;
  report.win_rate = divergence.win_rate;
  report.sentinel_count = divergence.capped;
  report.entropy = entropy(flat);
  const auto kl = kl_to_reference(flat, ref);
  report.kl_to_ref = kl.value;
  report.sentinel_count += kl.capped ? 1 : 0;

  if (config.mode == SamplingMode::kExact) {
    const auto ppl = expected_perplexity(policy);
    report.perplexity = ppl.value;
    report.sentinel_count += ppl.capped ? 1 : 0;
    report.avg_length = expected_length(flat, responses);
  } else {
    Rng rng = Rng::substream(config.seed, "evaluation_responses");
    std::vector<std::pair<std::size_t, Response>> eval;
    std::vector<Response> sampled;
    eval.reserve(config.responses);
    for (std::size_t n = 0; n < config.responses; ++n) {
      const std::size_t x = rng.index(policy.num_prompts());
      Response y = policy.sample(x, rng);
      sampled.push_back(y);
      eval.emplace_back(x, std::move(y));
    }
    const auto ppl = perplexity(policy, eval);
    report.perplexity = ppl.value;
    report.sentinel_count += ppl.capped ? 1 : 0;
    report.avg_length = avg_length(sampled);
  }
  return report;
}

}  // namespace pmrlhf
