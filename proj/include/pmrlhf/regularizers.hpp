#pragma once

// The regularizer family R(pi) added to reward maximization, the
// preference-matching ODE, and the log-sum-exp / entropy duality check.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pmrlhf/jet.hpp"
#include "pmrlhf/preference.hpp"

namespace pmrlhf {

// Counts probabilities that had to be floored before entering a logarithm.
struct ClampLog {
  std::size_t clamped = 0;
};

// A per-prompt constant (C1 or C2): either one value broadcast to every
// prompt or one value per prompt.
class PromptConstant {
 public:
  PromptConstant(double value = 0.0) : values_{value} {}  // NOLINT
  explicit PromptConstant(std::vector<double> per_prompt);

  double at(std::size_t prompt) const;
  bool is_broadcast() const { return values_.size() == 1; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

// Convex generator f of an f-divergence with f(1) = 0, together with f' and
// its inverse.
struct FDivergenceSpec {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  std::function<double(double)> f_prime_inverse;

  // f(u) = u log u.
  static FDivergenceSpec kl();
  // f(u) = (u - 1)^2.
  static FDivergenceSpec chi_squared();
  // f(u) = -log u.
  static FDivergenceSpec reverse_kl();
  // f(u) = (sqrt(u) - 1)^2.
  static FDivergenceSpec squared_hellinger();
  static FDivergenceSpec by_name(const std::string& name);
  static std::vector<std::string> known_names();

  // Checks f(1) = 0, midpoint convexity on a grid over (0.01, 10) and
  // f'^-1(f'(u)) = u on the same grid. Returns the failed checks (empty when
  // valid).
  std::vector<std::string> check() const;
};

// Membership mask M(x) over responses with the rule that produced it.
class RegularSet {
 public:
  struct Explicit {};
  struct Threshold {
    double alpha = 0.0;
  };
  using Rule = std::variant<Explicit, Threshold>;

  RegularSet(std::vector<std::vector<std::uint8_t>> mask, Rule rule);
  // M(x) = {y : reference(y|x) >= alpha}. alpha <= 0 selects everything.
  // Throws ConfigError naming the prompt and its largest probability when a
  // prompt would end up with an empty set.
  static RegularSet from_threshold(const TabularPolicy& reference, double alpha);
  static RegularSet from_members(const std::vector<std::vector<std::size_t>>& members,
                                 std::span<const std::size_t> sizes);
  static RegularSet all(std::span<const std::size_t> sizes);

  bool contains(std::size_t prompt, std::size_t response) const;
  std::size_t num_prompts() const { return mask_.size(); }
  std::size_t num_responses(std::size_t prompt) const { return mask_.at(prompt).size(); }
  const Rule& rule() const { return rule_; }
  const std::vector<std::vector<std::uint8_t>>& mask() const { return mask_; }

 private:
  std::vector<std::vector<std::uint8_t>> mask_;
  Rule rule_;
};

struct ConstantEpsilon {
  double value = 1e-3;
};
// epsilon(x, y) = reference(y|x).
struct RefCalibratedEpsilon {
  TabularPolicy reference;
};
using EpsilonRule = std::variant<ConstantEpsilon, RefCalibratedEpsilon>;

struct NoRegularizer {};
// R = -log pi + C1 + C2 / pi.
struct PmRegularizer {
  PromptConstant c1 = 0.0;
  PromptConstant c2 = 0.0;
};
// R = -beta log(pi / pi_ref).
struct KlRegularizer {
  TabularPolicy reference;
  double beta = 1.0;
};
// Objective E_pi[r] - beta * D_f(pi || pi_ref); no pointwise form.
struct FDivRegularizer {
  FDivergenceSpec f;
  TabularPolicy reference;
  double beta = 1.0;
};
// R = -log pi + log(1/k).
struct UniformPenalty {};
// R = -log pi on M(x), -log(pi / eps) off M(x), plus C1 + C2 / pi.
struct ConditionalPmRegularizer {
  RegularSet regular_set;
  EpsilonRule epsilon;
  PromptConstant c1 = 0.0;
  PromptConstant c2 = 0.0;
};

using RegularizerSpec =
    std::variant<NoRegularizer, PmRegularizer, KlRegularizer, FDivRegularizer,
                 UniformPenalty, ConditionalPmRegularizer>;

// "none", "pm", "kl", "fdiv", "uniform_penalty", "conditional_pm".
std::string regularizer_tag(const RegularizerSpec& spec);
std::vector<std::string> regularizer_tags();

// Throws DomainError / ContractError when the regularizer is inconsistent with the
// reward table's shape (beta <= 0, reference of the wrong size, ...).
void validate_spec(const RegularizerSpec& spec, const RewardTable& rewards);

// R(pi) evaluated on a jet, giving R, R' and R'' at once. `pi` must be
// positive. Not available for FDivRegularizer.
Jet regularizer_jet(const RegularizerSpec& spec, std::size_t prompt,
                    std::size_t response, std::size_t num_responses, Jet pi);

// Pointwise R(pi). pi = 0 is floored at kProbabilityFloor and counted in
// `log`; a zero reference probability where one is needed is a DomainError.
double regularizer_value(const RegularizerSpec& spec, std::size_t prompt,
                         std::size_t response, std::size_t num_responses,
                         double pi_value, ClampLog* log = nullptr);

// Per-prompt objective J_x(pi) = sum_y pi(y) (r(x,y) + R(pi(y))), or
// E_pi[r] - beta D_f(pi || pi_ref) for f-divergences.
double prompt_objective(const RegularizerSpec& spec, const RewardTable& rewards,
                        std::size_t prompt, std::span<const double> row,
                        ClampLog* log = nullptr);

// Average of prompt_objective over prompts (prompts weighted uniformly).
double objective_value(const TabularPolicy& policy, const RewardTable& rewards,
                       const RegularizerSpec& spec, ClampLog* log = nullptr);

// dJ_x / dpi_i = r_i + R(pi_i) + pi_i R'(pi_i), or r_i - beta f'(pi_i/ref_i).
std::vector<double> objective_partials(const RegularizerSpec& spec,
                                       const RewardTable& rewards,
                                       std::size_t prompt,
                                       std::span<const double> row,
                                       ClampLog* log = nullptr);

// Sets C1 = -E_{y~ref}[r(x, y)] per prompt, C2 = 0.
PmRegularizer mean_zero_pm(const RewardTable& rewards, const TabularPolicy& reference);

// -E_{x uniform, y~ref}[r]: the unconditional centring constant.
double unconditional_mean_offset(const RewardTable& rewards,
                                 const TabularPolicy& reference);

using SmoothFunction = std::function<Jet(Jet)>;

enum class DerivativeMode {
  kAutomatic,          // exact derivatives through Jet
  kCentralDifference,  // step h = 1e-5 * pi
};

// pi R''(pi) + 2 R'(pi) + 1/pi.
double pm_ode_residual(const SmoothFunction& regularizer, double pi,
                       DerivativeMode mode = DerivativeMode::kAutomatic);

// R = -log pi + a + b / pi.
SmoothFunction pm_family(double a, double b);

// Max over i of |g_i - mean(g)| with g_i = r_i + R(pi_i) + pi_i R'(pi_i).
// The Lagrange multiplier of the simplex constraint drops out in the centring.
double stationarity_check(const TabularPolicy& policy, const RewardTable& rewards,
                          const PmRegularizer& spec);

struct FenchelOptions {
  double step_size = 1.0;
  double gradient_tolerance = 1e-10;
  std::size_t max_iterations = 2'000'000;
};

struct FenchelResult {
  double gap = 0.0;          // |max - sum pi log pi|
  double maximum = 0.0;      // sup_d <d, pi> - logsumexp(d)
  double negative_entropy = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

// Gradient ascent on the concave map d -> <d, pi> - logsumexp(d), started at
// `initial` (zeros when empty), compared against the negative entropy.
FenchelResult fenchel_duality_check(std::span<const double> row,
                                    std::span<const double> initial = {},
                                    const FenchelOptions& options = {});

}  // namespace pmrlhf
