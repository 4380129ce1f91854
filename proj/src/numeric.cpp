#include "pmrlhf/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmrlhf/errors.hpp"

namespace pmrlhf {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  long double total = 0.0L;
  for (double v : x) total += std::exp(static_cast<long double>(v - m));
  return m + static_cast<double>(std::log(total));
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  long double total = 0.0L;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& v : out) v = static_cast<double>(v / total);
  return out;
}

std::vector<double> weighted_softmax(std::span<const double> weights,
                                     std::span<const double> logits) {
  if (weights.size() != logits.size()) {
    throw ContractError("weighted_softmax: size mismatch");
  }
  std::vector<double> shifted(logits.size(),
                              -std::numeric_limits<double>::infinity());
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (weights[i] < 0.0) throw DomainError("weighted_softmax: negative weight");
    if (weights[i] > 0.0) {
      shifted[i] = std::log(weights[i]) + logits[i];
      any = true;
    }
  }
  if (!any) throw DomainError("weighted_softmax: all weights are zero");
  const double m = *std::max_element(shifted.begin(), shifted.end());
  std::vector<double> out(logits.size(), 0.0);
  long double total = 0.0L;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (weights[i] > 0.0) {
      out[i] = std::exp(shifted[i] - m);
      total += out[i];
    }
  }
  for (double& v : out) v = static_cast<double>(v / total);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double accurate_sum(std::span<const double> x) {
  long double total = 0.0L;
  for (double v : x) total += v;
  return static_cast<double>(total);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractError("total_variation: size mismatch");
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::fabs(p[i] - q[i]);
  return static_cast<double>(0.5L * total);
}

}  // namespace pmrlhf
