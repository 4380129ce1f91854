#pragma once

// Analytic optimal policies of regularized reward maximization and the
// two-response bias formulas they imply.

#include <vector>

#include "pmrlhf/preference.hpp"
#include "pmrlhf/regularizers.hpp"

namespace pmrlhf {

// pi(y|x) proportional to pi_ref(y|x) exp(r(x,y) / beta). Responses with zero
// reference mass get exactly zero.
TabularPolicy kl_rlhf_solution(const RewardTable& rewards,
                               const TabularPolicy& reference, double beta);

// Maximizer of the PM-regularized objective for every C1, C2: softmax(r).
TabularPolicy pm_rlhf_solution(const RewardTable& rewards);

// pi(y|x) proportional to eps(x,y) exp(r(x,y)), eps = 1 on M(x).
TabularPolicy conditional_pm_solution(const RewardTable& rewards,
                                      const RegularSet& regular_set,
                                      const EpsilonRule& epsilon);

// Closed-form maximizer for the pointwise specs (none excluded: the
// unregularized problem has a point-mass optimum, see argmax_point_mass).
// Throws ContractError for NoRegularizer and FDivRegularizer.
TabularPolicy closed_form_solution(const RewardTable& rewards,
                                   const RegularizerSpec& spec);

// p_ref p_reward / (p_ref p_reward + (1 - p_ref)(1 - p_reward)).
double binary_rlhf_preference(double p_ref, double p_reward);

struct FDivBinaryResult {
  double p_rlhf = 0.0;        // formula value for y_1
  double p_reward_f = 0.0;    // (f')^-1 weights normalized, for y_1
  double brute_force = 0.0;   // constrained maximizer's probability of y_1
  double diagnostic = 0.0;    // |p_rlhf - brute_force| (two-point TV)
  bool clamped = false;       // some (f')^-1 value was negative and set to 0
};

// Two-response f-divergence RLHF: the mixture formula with
// p^f_reward proportional to (f')^-1(r_i / beta), reported together with the
// distance to the brute-force maximizer of
//   q r1 + (1 - q) r2 - beta [p_ref f(q / p_ref) + (1 - p_ref) f((1-q)/(1-p_ref))].
FDivBinaryResult f_div_binary_preference(const FDivergenceSpec& f, double r1,
                                         double r2, double beta, double p_ref);

struct BiasCurvePoint {
  double beta = 1.0;
  double p_ref = 0.5;
  double p_reward = 0.5;
  double p_rlhf = 0.5;
};

// For each p_reward on the grid: reward gap logit(p_reward), scaled by 1/beta
// in the KL-regularized solution, then mixed with p_ref.
std::vector<BiasCurvePoint> bias_curve(double beta, double p_ref,
                                       const std::vector<double>& grid);

}  // namespace pmrlhf
