#pragma once

#include <span>
#include <vector>

namespace pmrlhf {

// Values above this are reported as "infinite" divergences.
inline constexpr double kDivergenceCap = 1e6;
// Floor applied to probabilities that enter a logarithm.
inline constexpr double kProbabilityFloor = 1e-300;

// log(sum(exp(x))) with the max subtracted first.
double log_sum_exp(std::span<const double> x);

// Softmax with the max subtracted first. Empty input gives empty output.
std::vector<double> softmax(std::span<const double> logits);

// Softmax of log(weight_i) + logit_i; entries with weight 0 get exactly 0.
std::vector<double> weighted_softmax(std::span<const double> weights,
                                     std::span<const double> logits);

// Logistic function, stable for large |x|.
double sigmoid(double x);

// log(sigmoid(x)) without cancellation.
double log_sigmoid(double x);

// Sum with a long double accumulator.
double accurate_sum(std::span<const double> x);

// 0.5 * sum |p - q|.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace pmrlhf
