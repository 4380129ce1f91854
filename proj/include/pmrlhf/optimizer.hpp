#pragma once

// Exact-gradient ascent on softmax-parameterized tabular policies.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/preference.hpp"
#include "pmrlhf/regularizers.hpp"

namespace pmrlhf {

// One free logit vector per prompt; probabilities are softmax(logits).
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(std::vector<std::vector<double>> logits);
  static SoftmaxPolicy zeros(std::span<const std::size_t> sizes);
  // logits = log(policy); requires strictly positive rows.
  static SoftmaxPolicy from_policy(const TabularPolicy& policy);

  std::size_t num_prompts() const { return logits_.size(); }
  std::span<const double> logits(std::size_t prompt) const { return logits_.at(prompt); }
  const std::vector<std::vector<double>>& logits() const { return logits_; }
  std::vector<double> row(std::size_t prompt) const;
  TabularPolicy probabilities() const;

 private:
  std::vector<std::vector<double>> logits_;
};

enum class Initialization {
  kZero,       // uniform policy
  kReference,  // log of the regularizer's reference policy (KL, f-divergence,
               // reference-calibrated conditional PM)
};

enum class AscentDirection {
  // Fisher-preconditioned gradient: d_i = g_i - E_pi[g]. Its inner product
  // with the logit gradient is Var_pi(g) >= 0, so it is an ascent direction.
  kNatural,
  // Plain logit gradient pi_i (g_i - E_pi[g]).
  kEuclidean,
};

struct OptimizerConfig {
  double step_size = 1.0;
  std::size_t max_iterations = 50'000;
  double gradient_tolerance = 1e-9;
  Initialization initialization = Initialization::kZero;
  AscentDirection direction = AscentDirection::kNatural;
  // Record every n-th iteration (0 disables recording; the final iterate is
  // always recorded when enabled).
  std::size_t record_stride = 0;
  std::size_t jobs = 1;

  void validate() const;
};

struct TrajectoryPoint {
  std::size_t prompt = 0;
  std::size_t iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
};

struct OptimizeResult {
  SoftmaxPolicy policy;
  std::vector<TrajectoryPoint> trajectory;  // prompt-major
  bool converged = false;                   // every prompt met the tolerance
  bool failed = false;                      // objective decreased 10 times in a row
  std::string failure;
  double max_grad_norm = 0.0;
  std::size_t max_iterations_used = 0;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

// Gradient of objective_value (prompts averaged) with respect to the logits.
std::vector<std::vector<double>> objective_gradient(const SoftmaxPolicy& policy,
                                                    const RewardTable& rewards,
                                                    const RegularizerSpec& spec);

// Per-prompt ascent with backtracking (halving from config.step_size) until
// the logit-gradient norm of that prompt is <= tolerance. The first logit of
// every prompt is held at 0.
OptimizeResult optimize(const RewardTable& rewards, const RegularizerSpec& spec,
                        const OptimizerConfig& config = {},
                        const std::optional<SoftmaxPolicy>& initial = std::nullopt);

inline constexpr double kPmTvThreshold = 1e-4;

struct PmPropertyResult {
  bool pass = false;
  double max_tv = 0.0;
  std::vector<double> tv_per_prompt;
  OptimizeResult run;
};

// Optimizes under `spec` and compares the result to softmax(r): PASS when the
// TV distance is <= 1e-4 on every prompt. Throws OptimizerError when the
// optimizer fails.
PmPropertyResult pm_property_test(const RewardTable& rewards,
                                  const RegularizerSpec& spec,
                                  const OptimizerConfig& config = {});

}  // namespace pmrlhf
