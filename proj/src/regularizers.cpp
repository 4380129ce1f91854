#include "pmrlhf/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmrlhf/errors.hpp"
#include "pmrlhf/numeric.hpp"

namespace pmrlhf {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double reference_mass(const TabularPolicy& reference, std::size_t prompt,
                      std::size_t response) {
  const double p = reference(prompt, response);
  if (!(p > 0.0)) {
    throw DomainError("reference probability is zero at prompt " +
                      std::to_string(prompt) + ", response " +
                      std::to_string(response));
  }
  return p;
}

double epsilon_at(const EpsilonRule& rule, std::size_t prompt,
                  std::size_t response) {
  return std::visit(
      Overloaded{
          [](const ConstantEpsilon& c) { return c.value; },
          [&](const RefCalibratedEpsilon& r) {
            return reference_mass(r.reference, prompt, response);
          },
      },
      rule);
}

double floored(double pi, ClampLog* log) {
  if (pi > 0.0) return pi;
  if (log) ++log->clamped;
  return kProbabilityFloor;
}

void check_reference_shape(const TabularPolicy& reference,
                           const RewardTable& rewards, const char* what) {
  if (reference.num_prompts() != rewards.num_prompts()) {
    throw ContractError(std::string(what) + ": reference has " +
                        std::to_string(reference.num_prompts()) +
                        " prompts, rewards have " +
                        std::to_string(rewards.num_prompts()));
  }
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    if (reference.num_responses(x) != rewards.num_responses(x)) {
      throw ContractError(std::string(what) + ": reference row " +
                          std::to_string(x) + " has the wrong length");
    }
  }
}

void check_constant(const PromptConstant& c, std::size_t prompts,
                    const char* what) {
  if (!c.is_broadcast() && c.values().size() != prompts) {
    throw ContractError(std::string(what) + " needs one value per prompt");
  }
}

}  // namespace

PromptConstant::PromptConstant(std::vector<double> per_prompt)
    : values_(std::move(per_prompt)) {
  if (values_.empty()) values_.push_back(0.0);
}

double PromptConstant::at(std::size_t prompt) const {
  if (values_.size() == 1) return values_.front();
  if (prompt >= values_.size()) {
    throw ContractError("PromptConstant: no value for prompt " +
                        std::to_string(prompt));
  }
  return values_[prompt];
}

FDivergenceSpec FDivergenceSpec::kl() {
  return {"kl", [](double u) { return u > 0.0 ? u * std::log(u) : 0.0; },
          [](double u) { return std::log(u) + 1.0; },
          [](double v) { return std::exp(v - 1.0); }};
}

FDivergenceSpec FDivergenceSpec::chi_squared() {
  return {"chi_squared", [](double u) { return (u - 1.0) * (u - 1.0); },
          [](double u) { return 2.0 * (u - 1.0); },
          [](double v) { return 1.0 + 0.5 * v; }};
}

FDivergenceSpec FDivergenceSpec::reverse_kl() {
  return {"reverse_kl", [](double u) { return -std::log(u); },
          [](double u) { return -1.0 / u; },
          [](double v) { return -1.0 / v; }};
}

FDivergenceSpec FDivergenceSpec::squared_hellinger() {
  return {"squared_hellinger",
          [](double u) {
            const double s = std::sqrt(u) - 1.0;
            return s * s;
          },
          [](double u) { return 1.0 - 1.0 / std::sqrt(u); },
          [](double v) { return 1.0 / ((1.0 - v) * (1.0 - v)); }};
}

FDivergenceSpec FDivergenceSpec::by_name(const std::string& name) {
  if (name == "kl") return kl();
  if (name == "chi_squared") return chi_squared();
  if (name == "reverse_kl") return reverse_kl();
  if (name == "squared_hellinger") return squared_hellinger();
  throw ConfigError("unknown f-divergence '" + name + "'");
}

std::vector<std::string> FDivergenceSpec::known_names() {
  return {"kl", "chi_squared", "reverse_kl", "squared_hellinger"};
}

std::vector<std::string> FDivergenceSpec::check() const {
  std::vector<std::string> failures;
  if (!f || !f_prime || !f_prime_inverse) {
    failures.push_back(name + ": missing function handle");
    return failures;
  }
  if (std::fabs(f(1.0)) > 1e-12) failures.push_back(name + ": f(1) != 0");
  constexpr int kPoints = 200;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid[i] = 0.01 + (10.0 - 0.01) * i / (kPoints - 1);
  }
  bool convex = true;
  for (std::size_t i = 0; i < grid.size() && convex; ++i) {
    for (std::size_t j = i + 1; j < grid.size(); j += 7) {
      const double mid = f(0.5 * (grid[i] + grid[j]));
      const double mean = 0.5 * (f(grid[i]) + f(grid[j]));
      if (mid > mean + 1e-12 * (1.0 + std::fabs(mean))) {
        convex = false;
        break;
      }
    }
  }
  if (!convex) failures.push_back(name + ": midpoint convexity fails");
  for (double u : grid) {
    if (std::fabs(f_prime_inverse(f_prime(u)) - u) > 1e-9 * std::max(1.0, u)) {
      failures.push_back(name + ": f'^-1(f'(u)) != u");
      break;
    }
  }
  return failures;
}

RegularSet::RegularSet(std::vector<std::vector<std::uint8_t>> mask, Rule rule)
    : mask_(std::move(mask)), rule_(rule) {
  for (std::size_t x = 0; x < mask_.size(); ++x) {
    if (std::none_of(mask_[x].begin(), mask_[x].end(),
                     [](std::uint8_t m) { return m != 0; })) {
      throw ConfigError("RegularSet: prompt " + std::to_string(x) +
                        " has no member");
    }
  }
}

RegularSet RegularSet::from_threshold(const TabularPolicy& reference,
                                      double alpha) {
  std::vector<std::vector<std::uint8_t>> mask(reference.num_prompts());
  for (std::size_t x = 0; x < reference.num_prompts(); ++x) {
    const auto row = reference.row(x);
    mask[x].resize(row.size());
    for (std::size_t y = 0; y < row.size(); ++y) {
      mask[x][y] = (alpha <= 0.0 || row[y] >= alpha) ? 1 : 0;
    }
    if (std::none_of(mask[x].begin(), mask[x].end(),
                     [](std::uint8_t m) { return m != 0; })) {
      const double best = *std::max_element(row.begin(), row.end());
      throw ConfigError("regular set threshold " + std::to_string(alpha) +
                        " exceeds the largest reference probability " +
                        std::to_string(best) + " at prompt " + std::to_string(x));
    }
  }
  return RegularSet(std::move(mask), Threshold{alpha});
}

RegularSet RegularSet::from_members(
    const std::vector<std::vector<std::size_t>>& members,
    std::span<const std::size_t> sizes) {
  if (members.size() != sizes.size()) {
    throw ContractError("RegularSet: one member list per prompt required");
  }
  std::vector<std::vector<std::uint8_t>> mask(sizes.size());
  for (std::size_t x = 0; x < sizes.size(); ++x) {
    mask[x].assign(sizes[x], 0);
    for (std::size_t y : members[x]) {
      if (y >= sizes[x]) throw ContractError("RegularSet: member out of range");
      mask[x][y] = 1;
    }
  }
  return RegularSet(std::move(mask), Explicit{});
}

RegularSet RegularSet::all(std::span<const std::size_t> sizes) {
  std::vector<std::vector<std::uint8_t>> mask;
  for (std::size_t k : sizes) mask.emplace_back(k, 1);
  return RegularSet(std::move(mask), Explicit{});
}

bool RegularSet::contains(std::size_t prompt, std::size_t response) const {
  return mask_.at(prompt).at(response) != 0;
}

std::string regularizer_tag(const RegularizerSpec& spec) {
  return std::visit(Overloaded{
                        [](const NoRegularizer&) { return std::string("none"); },
                        [](const PmRegularizer&) { return std::string("pm"); },
                        [](const KlRegularizer&) { return std::string("kl"); },
                        [](const FDivRegularizer&) { return std::string("fdiv"); },
                        [](const UniformPenalty&) {
                          return std::string("uniform_penalty");
                        },
                        [](const ConditionalPmRegularizer&) {
                          return std::string("conditional_pm");
                        },
                    },
                    spec);
}

std::vector<std::string> regularizer_tags() {
  return {"none", "pm", "kl", "fdiv", "uniform_penalty", "conditional_pm"};
}

void validate_spec(const RegularizerSpec& spec, const RewardTable& rewards) {
  const std::size_t prompts = rewards.num_prompts();
  std::visit(
      Overloaded{
          [](const NoRegularizer&) {},
          [](const UniformPenalty&) {},
          [&](const PmRegularizer& s) {
            check_constant(s.c1, prompts, "PM C1");
            check_constant(s.c2, prompts, "PM C2");
          },
          [&](const KlRegularizer& s) {
            if (!(s.beta > 0.0)) throw DomainError("KL regularizer: beta must be > 0");
            check_reference_shape(s.reference, rewards, "KL regularizer");
          },
          [&](const FDivRegularizer& s) {
            if (!(s.beta > 0.0)) throw DomainError("f-divergence: beta must be > 0");
            check_reference_shape(s.reference, rewards, "f-divergence");
            if (auto failures = s.f.check(); !failures.empty()) {
              throw DomainError("f-divergence generator invalid: " + failures.front());
            }
          },
          [&](const ConditionalPmRegularizer& s) {
            check_constant(s.c1, prompts, "conditional PM C1");
            check_constant(s.c2, prompts, "conditional PM C2");
            if (s.regular_set.num_prompts() != prompts) {
              throw ContractError("conditional PM: regular set prompt count mismatch");
            }
            for (std::size_t x = 0; x < prompts; ++x) {
              if (s.regular_set.num_responses(x) != rewards.num_responses(x)) {
                throw ContractError("conditional PM: regular set row " +
                                    std::to_string(x) + " has the wrong length");
              }
            }
            if (const auto* c = std::get_if<ConstantEpsilon>(&s.epsilon)) {
              if (!(c->value > 0.0)) {
                throw DomainError("conditional PM: epsilon must be > 0");
              }
            } else {
              check_reference_shape(std::get<RefCalibratedEpsilon>(s.epsilon).reference,
                                    rewards, "conditional PM epsilon reference");
            }
          },
      },
      spec);
}

Jet regularizer_jet(const RegularizerSpec& spec, std::size_t prompt,
                    std::size_t response, std::size_t num_responses, Jet pi) {
  return std::visit(
      Overloaded{
          [](const NoRegularizer&) { return Jet(0.0); },
          [&](const PmRegularizer& s) {
            return -log(pi) + Jet(s.c1.at(prompt)) + Jet(s.c2.at(prompt)) / pi;
          },
          [&](const KlRegularizer& s) {
            const double ref = reference_mass(s.reference, prompt, response);
            return Jet(-s.beta) * (log(pi) - Jet(std::log(ref)));
          },
          [&](const FDivRegularizer&) -> Jet {
            throw ContractError(
                "f-divergence regularizer has no pointwise form; use objective_value");
          },
          [&](const UniformPenalty&) {
            return -log(pi) - Jet(std::log(static_cast<double>(num_responses)));
          },
          [&](const ConditionalPmRegularizer& s) {
            Jet r = -log(pi) + Jet(s.c1.at(prompt)) + Jet(s.c2.at(prompt)) / pi;
            if (!s.regular_set.contains(prompt, response)) {
              r = r + Jet(std::log(epsilon_at(s.epsilon, prompt, response)));
            }
            return r;
          },
      },
      spec);
}

double regularizer_value(const RegularizerSpec& spec, std::size_t prompt,
                         std::size_t response, std::size_t num_responses,
                         double pi_value, ClampLog* log) {
  if (pi_value > 1.0 || std::isnan(pi_value) || pi_value < 0.0) {
    throw DomainError("regularizer_value: probability outside [0, 1]");
  }
  const double pi = floored(pi_value, log);
  return regularizer_jet(spec, prompt, response, num_responses, Jet(pi)).value;
}

double prompt_objective(const RegularizerSpec& spec, const RewardTable& rewards,
                        std::size_t prompt, std::span<const double> row,
                        ClampLog* log) {
  const auto r = rewards.row(prompt);
  if (row.size() != r.size()) {
    throw ContractError("prompt_objective: policy row and rewards differ in size");
  }
  if (const auto* s = std::get_if<FDivRegularizer>(&spec)) {
    long double value = 0.0L;
    long double divergence = 0.0L;
    for (std::size_t y = 0; y < row.size(); ++y) {
      value += row[y] * r[y];
      const double ref = reference_mass(s->reference, prompt, y);
      divergence += ref * s->f.f(row[y] / ref);
    }
    return static_cast<double>(value - s->beta * divergence);
  }
  const std::size_t k = row.size();
  long double value = 0.0L;
  for (std::size_t y = 0; y < k; ++y) {
    if (row[y] == 0.0) {
      // 0 * (r + R(0)) with R(0) floored; only the warning remains.
      if (!std::holds_alternative<NoRegularizer>(spec) && log) ++log->clamped;
      continue;
    }
    const double reg = regularizer_jet(spec, prompt, y, k, Jet(row[y])).value;
    value += row[y] * (r[y] + reg);
  }
  return static_cast<double>(value);
}

double objective_value(const TabularPolicy& policy, const RewardTable& rewards,
                       const RegularizerSpec& spec, ClampLog* log) {
  if (policy.num_prompts() != rewards.num_prompts()) {
    throw ContractError("objective_value: policy and rewards differ in prompts");
  }
  if (rewards.num_prompts() == 0) return 0.0;
  long double total = 0.0L;
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    total += prompt_objective(spec, rewards, x, policy.row(x), log);
  }
  return static_cast<double>(total / rewards.num_prompts());
}

std::vector<double> objective_partials(const RegularizerSpec& spec,
                                       const RewardTable& rewards,
                                       std::size_t prompt,
                                       std::span<const double> row,
                                       ClampLog* log) {
  const auto r = rewards.row(prompt);
  if (row.size() != r.size()) {
    throw ContractError("objective_partials: policy row and rewards differ in size");
  }
  std::vector<double> g(row.size());
  if (const auto* s = std::get_if<FDivRegularizer>(&spec)) {
    for (std::size_t y = 0; y < row.size(); ++y) {
      const double ref = reference_mass(s->reference, prompt, y);
      g[y] = r[y] - s->beta * s->f.f_prime(floored(row[y], log) / ref);
    }
    return g;
  }
  for (std::size_t y = 0; y < row.size(); ++y) {
    const double pi = std::holds_alternative<NoRegularizer>(spec)
                          ? row[y]
                          : floored(row[y], log);
    const Jet reg = regularizer_jet(spec, prompt, y, row.size(), Jet::variable(pi));
    g[y] = r[y] + reg.value + pi * reg.d1;
  }
  return g;
}

PmRegularizer mean_zero_pm(const RewardTable& rewards,
                           const TabularPolicy& reference) {
  std::vector<double> c1(rewards.num_prompts());
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const auto r = rewards.row(x);
    const auto p = reference.row(x);
    if (p.size() != r.size()) throw ContractError("mean_zero_pm: size mismatch");
    long double mean = 0.0L;
    for (std::size_t y = 0; y < r.size(); ++y) mean += p[y] * r[y];
    c1[x] = -static_cast<double>(mean);
  }
  return PmRegularizer{PromptConstant(std::move(c1)), 0.0};
}

double unconditional_mean_offset(const RewardTable& rewards,
                                 const TabularPolicy& reference) {
  const auto per_prompt = mean_zero_pm(rewards, reference).c1.values();
  return accurate_sum(per_prompt) / static_cast<double>(per_prompt.size());
}

double pm_ode_residual(const SmoothFunction& regularizer, double pi,
                       DerivativeMode mode) {
  if (!(pi > 0.0 && pi < 1.0)) {
    throw DomainError("pm_ode_residual: pi must lie in (0, 1)");
  }
  double d1 = 0.0;
  double d2 = 0.0;
  if (mode == DerivativeMode::kAutomatic) {
    const Jet j = regularizer(Jet::variable(pi));
    d1 = j.d1;
    d2 = j.d2;
  } else {
    const double h = 1e-5 * pi;
    const double fp = regularizer(Jet(pi + h)).value;
    const double f0 = regularizer(Jet(pi)).value;
    const double fm = regularizer(Jet(pi - h)).value;
    d1 = (fp - fm) / (2.0 * h);
    d2 = (fp - 2.0 * f0 + fm) / (h * h);
  }
  return pi * d2 + 2.0 * d1 + 1.0 / pi;
}

SmoothFunction pm_family(double a, double b) {
  return [a, b](Jet p) { return -log(p) + Jet(a) + Jet(b) / p; };
}

double stationarity_check(const TabularPolicy& policy, const RewardTable& rewards,
                          const PmRegularizer& spec) {
  const RegularizerSpec wrapped = spec;
  double worst = 0.0;
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const auto row = policy.row(x);
    for (double p : row) {
      if (!(p > 0.0)) throw DomainError("stationarity_check: policy must be strictly positive");
    }
    const auto g = objective_partials(wrapped, rewards, x, row);
    const double mean = accurate_sum(g) / static_cast<double>(g.size());
    for (double v : g) worst = std::max(worst, std::fabs(v - mean));
  }
  return worst;
}

FenchelResult fenchel_duality_check(std::span<const double> row,
                                    std::span<const double> initial,
                                    const FenchelOptions& options) {
  const std::size_t k = row.size();
  if (k == 0) throw ContractError("fenchel_duality_check: empty row");
  for (double p : row) {
    if (!(p > 0.0)) throw DomainError("fenchel_duality_check: row must be strictly positive");
  }
  if (!initial.empty() && initial.size() != k) {
    throw ContractError("fenchel_duality_check: initial point has the wrong size");
  }
  std::vector<double> d(k, 0.0);
  if (!initial.empty()) d.assign(initial.begin(), initial.end());

  auto value_at = [&](std::span<const double> point) {
    long double inner = 0.0L;
    for (std::size_t i = 0; i < k; ++i) inner += point[i] * row[i];
    return static_cast<double>(inner) - log_sum_exp(point);
  };

  FenchelResult result;
  for (std::size_t it = 0; it <= options.max_iterations; ++it) {
    const auto s = softmax(d);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double g = row[i] - s[i];
      norm2 += g * g;
    }
    result.iterations = it;
    if (std::sqrt(norm2) <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    if (it == options.max_iterations) break;
    for (std::size_t i = 0; i < k; ++i) d[i] += options.step_size * (row[i] - s[i]);
  }
  result.maximum = value_at(d);
  long double neg_entropy = 0.0L;
  for (double p : row) neg_entropy += p * std::log(p);
  result.negative_entropy = static_cast<double>(neg_entropy);
  result.gap = std::fabs(result.maximum - result.negative_entropy);
  return result;
}

}  // namespace pmrlhf
