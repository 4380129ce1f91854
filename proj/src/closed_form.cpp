#include "pmrlhf/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

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

// Maximizes a concave function on [0, 1]: grid scan followed by golden-section
// refinement around the best grid point.
double maximize_on_unit_interval(const std::function<double(double)>& phi) {
  constexpr int kGrid = 2000;
  auto safe = [&](double q) {
    const double v = phi(q);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double v = safe(static_cast<double>(i) / kGrid);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / kGrid);
  double hi = std::min(1.0, (best + 1.0) / kGrid);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = safe(a);
  double fb = safe(b);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = safe(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = safe(a);
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double grid_point = static_cast<double>(best) / kGrid;
  return safe(refined) >= best_value ? refined : grid_point;
}

}  // namespace

TabularPolicy kl_rlhf_solution(const RewardTable& rewards,
                               const TabularPolicy& reference, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("kl_rlhf_solution: beta must be a positive finite number");
  }
  if (reference.num_prompts() != rewards.num_prompts()) {
    throw ContractError("kl_rlhf_solution: reference/reward prompt mismatch");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(rewards.num_prompts());
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    std::vector<double> scaled(rewards.row(x).begin(), rewards.row(x).end());
    for (double& v : scaled) v /= beta;
    rows.push_back(weighted_softmax(reference.row(x), scaled));
  }
  return TabularPolicy(std::move(rows));
}

TabularPolicy pm_rlhf_solution(const RewardTable& rewards) {
  return pm_policy(rewards);
}

TabularPolicy conditional_pm_solution(const RewardTable& rewards,
                                      const RegularSet& regular_set,
                                      const EpsilonRule& epsilon) {
  if (regular_set.num_prompts() != rewards.num_prompts()) {
    throw ContractError("conditional_pm_solution: regular set prompt mismatch");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(rewards.num_prompts());
  for (std::size_t x = 0; x < rewards.num_prompts(); ++x) {
    const auto r = rewards.row(x);
    std::vector<double> weights(r.size(), 1.0);
    for (std::size_t y = 0; y < r.size(); ++y) {
      if (regular_set.contains(x, y)) continue;
      weights[y] = std::visit(
          Overloaded{
              [](const ConstantEpsilon& c) { return c.value; },
              [&](const RefCalibratedEpsilon& e) { return e.reference(x, y); },
          },
          epsilon);
      if (!(weights[y] > 0.0)) {
        throw DomainError("conditional_pm_solution: epsilon must be positive off the regular set");
      }
    }
    rows.push_back(weighted_softmax(weights, r));
  }
  return TabularPolicy(std::move(rows));
}

TabularPolicy closed_form_solution(const RewardTable& rewards,
                                   const RegularizerSpec& spec) {
  return std::visit(
      Overloaded{
          [&](const NoRegularizer&) -> TabularPolicy {
            throw ContractError("closed_form_solution: unregularized problem has no interior optimum");
          },
          [&](const FDivRegularizer&) -> TabularPolicy {
            throw ContractError("closed_form_solution: no closed form for f-divergences");
          },
          [&](const PmRegularizer&) { return pm_rlhf_solution(rewards); },
          [&](const UniformPenalty&) { return pm_rlhf_solution(rewards); },
          [&](const KlRegularizer& s) {
            return kl_rlhf_solution(rewards, s.reference, s.beta);
          },
          [&](const ConditionalPmRegularizer& s) {
            return conditional_pm_solution(rewards, s.regular_set, s.epsilon);
          },
      },
      spec);
}

double binary_rlhf_preference(double p_ref, double p_reward) {
  if (!(p_ref >= 0.0 && p_ref <= 1.0) || !(p_reward >= 0.0 && p_reward <= 1.0)) {
    throw DomainError("binary_rlhf_preference: probabilities must lie in [0, 1]");
  }
  const double num = p_ref * p_reward;
  const double den = num + (1.0 - p_ref) * (1.0 - p_reward);
  if (den == 0.0) {
    throw UndefinedConditionalError(
        "binary_rlhf_preference: reference and reward are degenerate in opposite directions");
  }
  return num / den;
}

FDivBinaryResult f_div_binary_preference(const FDivergenceSpec& f, double r1,
                                         double r2, double beta, double p_ref) {
  if (!(beta > 0.0)) throw DomainError("f_div_binary_preference: beta must be > 0");
  if (!(p_ref > 0.0 && p_ref < 1.0)) {
    throw DomainError("f_div_binary_preference: p_ref must lie in (0, 1)");
  }
  FDivBinaryResult out;
  double w1 = f.f_prime_inverse(r1 / beta);
  double w2 = f.f_prime_inverse(r2 / beta);
  if (!std::isfinite(w1) || !std::isfinite(w2)) {
    throw DomainError("f_div_binary_preference: (f')^-1 is not finite at r/beta");
  }
  if (w1 < 0.0) {
    w1 = 0.0;
    out.clamped = true;
  }
  if (w2 < 0.0) {
    w2 = 0.0;
    out.clamped = true;
  }
  if (w1 + w2 <= 0.0) {
    throw DomainError("f_div_binary_preference: degenerate f, both masses are zero");
  }
  out.p_reward_f = w1 / (w1 + w2);
  out.p_rlhf = binary_rlhf_preference(p_ref, out.p_reward_f);

  auto objective = [&](double q) {
    return q * r1 + (1.0 - q) * r2 -
           beta * (p_ref * f.f(q / p_ref) +
                   (1.0 - p_ref) * f.f((1.0 - q) / (1.0 - p_ref)));
  };
  out.brute_force = maximize_on_unit_interval(objective);
  out.diagnostic = std::fabs(out.p_rlhf - out.brute_force);
  return out;
}

std::vector<BiasCurvePoint> bias_curve(double beta, double p_ref,
                                       const std::vector<double>& grid) {
  if (!(beta > 0.0)) throw DomainError("bias_curve: beta must be > 0");
  std::vector<BiasCurvePoint> out;
  out.reserve(grid.size());
  for (double p : grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bias_curve: grid must lie in [0, 1]");
    double scaled = p;
    if (beta != 1.0 && p > 0.0 && p < 1.0) {
      scaled = sigmoid((std::log(p) - std::log1p(-p)) / beta);
    }
    out.push_back({beta, p_ref, p, binary_rlhf_preference(p_ref, scaled)});
  }
  return out;
}

}  // namespace pmrlhf
