#include "pmrlhf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "pmrlhf/numeric.hpp"
#include "pmrlhf/parallel.hpp"

namespace pmrlhf {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-30;
constexpr std::size_t kMaxConsecutiveDecreases = 10;

struct PromptRun {
  std::vector<double> logits;
  std::vector<TrajectoryPoint> trajectory;
  bool converged = false;
  bool failed = false;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

const TabularPolicy* spec_reference(const RegularizerSpec& spec) {
  if (const auto* s = std::get_if<KlRegularizer>(&spec)) return &s->reference;
  if (const auto* s = std::get_if<FDivRegularizer>(&spec)) return &s->reference;
  if (const auto* s = std::get_if<ConditionalPmRegularizer>(&spec)) {
    if (const auto* e = std::get_if<RefCalibratedEpsilon>(&s->epsilon)) {
      return &e->reference;
    }
  }
  return nullptr;
}

// Logit gradient of the per-prompt objective and the partials it came from.
struct LocalGradient {
  std::vector<double> probs;
  std::vector<double> partials;
  std::vector<double> centred;  // g_i - E_pi[g]
  std::vector<double> grad;     // pi_i (g_i - E_pi[g])
  double norm = 0.0;
};

LocalGradient local_gradient(const RegularizerSpec& spec,
                             const RewardTable& rewards, std::size_t prompt,
                             std::span<const double> logits) {
  LocalGradient out;
  out.probs = softmax(logits);
  out.partials = objective_partials(spec, rewards, prompt, out.probs);
  long double mean = 0.0L;
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    mean += out.probs[i] * out.partials[i];
  }
  out.centred.resize(out.probs.size());
  out.grad.resize(out.probs.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    out.centred[i] = out.partials[i] - static_cast<double>(mean);
    out.grad[i] = out.probs[i] * out.centred[i];
    norm2 += out.grad[i] * out.grad[i];
  }
  out.norm = std::sqrt(norm2);
  return out;
}

void gauge_fix(std::vector<double>& logits) {
  const double z0 = logits.front();
  for (double& z : logits) z -= z0;
}

PromptRun optimize_prompt(const RewardTable& rewards, const RegularizerSpec& spec,
                          const OptimizerConfig& config, std::size_t prompt,
                          std::vector<double> logits) {
  PromptRun run;
  gauge_fix(logits);
  double objective = prompt_objective(spec, rewards, prompt, softmax(logits));
  std::size_t decreases = 0;
  std::vector<double> trial(logits.size());

  for (std::size_t it = 0;; ++it) {
    const LocalGradient g = local_gradient(spec, rewards, prompt, logits);
    run.grad_norm = g.norm;
    run.iterations = it;
    const bool done = g.norm <= config.gradient_tolerance;
    const bool out_of_budget = it >= config.max_iterations;
    if (config.record_stride > 0 &&
        (it % config.record_stride == 0 || done || out_of_budget)) {
      run.trajectory.push_back({prompt, it, objective, g.norm});
    }
    if (done) {
      run.converged = true;
      break;
    }
    if (out_of_budget) break;

    const std::vector<double>& direction =
        config.direction == AscentDirection::kNatural ? g.centred : g.grad;
    double slope = 0.0;
    for (std::size_t i = 0; i < direction.size(); ++i) slope += g.grad[i] * direction[i];

    // Backtracking: halve until the Armijo condition holds. Differences below
    // rounding level of the objective are accepted.
    const double slack = 1e-14 * (1.0 + std::fabs(objective));
    double step = config.step_size;
    double trial_objective = objective;
    bool accepted = false;
    while (step >= kMinStep) {
      for (std::size_t i = 0; i < logits.size(); ++i) {
        trial[i] = logits[i] + step * direction[i];
      }
      gauge_fix(trial);
      trial_objective = prompt_objective(spec, rewards, prompt, softmax(trial));
      if (std::isfinite(trial_objective) &&
          trial_objective + slack >= objective + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable ascent left
    decreases = trial_objective < objective ? decreases + 1 : 0;
    logits.swap(trial);
    objective = trial_objective;
    if (decreases >= kMaxConsecutiveDecreases) {
      run.failed = true;
      break;
    }
  }
  run.logits = std::move(logits);
  return run;
}

}  // namespace

SoftmaxPolicy::SoftmaxPolicy(std::vector<std::vector<double>> logits)
    : logits_(std::move(logits)) {
  for (const auto& row : logits_) {
    if (row.empty()) throw ContractError("SoftmaxPolicy: empty logit row");
    for (double z : row) {
      if (!std::isfinite(z)) throw DomainError("SoftmaxPolicy: non-finite logit");
    }
  }
}

SoftmaxPolicy SoftmaxPolicy::zeros(std::span<const std::size_t> sizes) {
  std::vector<std::vector<double>> logits;
  for (std::size_t k : sizes) logits.emplace_back(k, 0.0);
  return SoftmaxPolicy(std::move(logits));
}

SoftmaxPolicy SoftmaxPolicy::from_policy(const TabularPolicy& policy) {
  std::vector<std::vector<double>> logits(policy.num_prompts());
  for (std::size_t x = 0; x < policy.num_prompts(); ++x) {
    const auto row = policy.log_row(x);
    logits[x].assign(row.begin(), row.end());
  }
  return SoftmaxPolicy(std::move(logits));
}

std::vector<double> SoftmaxPolicy::row(std::size_t prompt) const {
  return softmax(logits_.at(prompt));
}

TabularPolicy SoftmaxPolicy::probabilities() const {
  std::vector<std::vector<double>> rows;
  rows.reserve(logits_.size());
  for (const auto& z : logits_) rows.push_back(softmax(z));
  return TabularPolicy(std::move(rows));
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("OptimizerConfig: step_size must be > 0");
  if (!(gradient_tolerance > 0.0)) {
    throw ConfigError("OptimizerConfig: gradient_tolerance must be > 0");
  }
  if (max_iterations == 0) throw ConfigError("OptimizerConfig: max_iterations must be >= 1");
}

std::vector<std::vector<double>> objective_gradient(const SoftmaxPolicy& policy,
                                                    const RewardTable& rewards,
                                                    const RegularizerSpec& spec) {
  if (policy.num_prompts() != rewards.num_prompts()) {
    throw ContractError("objective_gradient: policy/reward prompt mismatch");
  }
  const double weight = 1.0 / static_cast<double>(rewards.num_prompts());
  std::vector<std::vector<double>> out(rewards.num_prompts());
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    auto g = local_gradient(spec, rewards, x, policy.logits(x));
    for (double& v : g.grad) v *= weight;
    out[x] = std::move(g.grad);
  }
  return out;
}

OptimizeResult optimize(const RewardTable& rewards, const RegularizerSpec& spec,
                        const OptimizerConfig& config,
                        const std::optional<SoftmaxPolicy>& initial) {
  config.validate();
  validate_spec(spec, rewards);
  const std::size_t prompts = rewards.num_prompts();

  std::vector<std::vector<double>> start(prompts);
  if (initial) {
    if (initial->num_prompts() != prompts) {
      throw ContractError("optimize: initial policy has the wrong prompt count");
    }
    start = initial->logits();
  } else if (config.initialization == Initialization::kReference) {
    const TabularPolicy* ref = spec_reference(spec);
    if (!ref) throw ConfigError("optimize: reference initialization needs a reference policy");
    start = SoftmaxPolicy::from_policy(*ref).logits();
  } else {
    for (std::size_t x = 0; x < prompts; ++x) start[x].assign(rewards.num_responses(x), 0.0);
  }
  for (std::size_t x = 0; x < prompts; ++x) {
    if (start[x].size() != rewards.num_responses(x)) {
      throw ContractError("optimize: initial logits have the wrong length");
    }
  }

  std::vector<PromptRun> runs(prompts);
  parallel_for(prompts, config.jobs, [&](std::size_t x) {
    runs[x] = optimize_prompt(rewards, spec, config, x, start[x]);
  });

  std::vector<std::vector<double>> logits(prompts);
  OptimizeResult result{SoftmaxPolicy(std::vector<std::vector<double>>{}), {}, false, false, {}, 0.0, 0};
  result.converged = true;
  for (std::size_t x = 0; x < prompts; ++x) {
    logits[x] = std::move(runs[x].logits);
    result.trajectory.insert(result.trajectory.end(), runs[x].trajectory.begin(),
                             runs[x].trajectory.end());
    result.converged = result.converged && runs[x].converged;
    if (runs[x].failed && !result.failed) {
      result.failed = true;
      result.failure = "objective decreased across " +
                       std::to_string(kMaxConsecutiveDecreases) +
                       " consecutive accepted steps at prompt " + std::to_string(x);
    }
    result.max_grad_norm = std::max(result.max_grad_norm, runs[x].grad_norm);
    result.max_iterations_used = std::max(result.max_iterations_used, runs[x].iterations);
  }
  result.policy = SoftmaxPolicy(std::move(logits));
  return result;
}

PmPropertyResult pm_property_test(const RewardTable& rewards,
                                  const RegularizerSpec& spec,
                                  const OptimizerConfig& config) {
  PmPropertyResult out{false, 0.0, {}, optimize(rewards, spec, config)};
  if (out.run.failed) throw OptimizerError("pm_property_test: " + out.run.failure);
  const TabularPolicy target = pm_policy(rewards);
  out.pass = true;
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const double tv = total_variation(out.run.policy.row(x), target.row(x));
    out.tv_per_prompt.push_back(tv);
    out.max_tv = std::max(out.max_tv, tv);
    if (tv > kPmTvThreshold) out.pass = false;
  }
  return out;
}

}  // namespace pmrlhf
