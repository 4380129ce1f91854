#pragma once

// Second-order forward-mode automatic differentiation.
//
// A Jet carries (f, f', f'') of a scalar function at a point, so evaluating
// R(Jet::variable(p)) yields R(p), R'(p) and R''(p) exact to rounding.

#include <cmath>

namespace pmrlhf {

struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  constexpr Jet() = default;
  constexpr Jet(double v) : value(v) {}  // NOLINT: constants promote implicitly
  constexpr Jet(double v, double a, double b) : value(v), d1(a), d2(b) {}

  static constexpr Jet variable(double x) { return {x, 1.0, 0.0}; }
};

constexpr Jet operator+(Jet a, Jet b) {
  return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}
constexpr Jet operator-(Jet a, Jet b) {
  return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}
constexpr Jet operator-(Jet a) { return {-a.value, -a.d1, -a.d2}; }
constexpr Jet operator*(Jet a, Jet b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2};
}

// Chain rule for g(a) given g, g', g'' at a.value.
constexpr Jet compose(Jet a, double g, double dg, double d2g) {
  return {g, dg * a.d1, d2g * a.d1 * a.d1 + dg * a.d2};
}

inline Jet reciprocal(Jet a) {
  const double inv = 1.0 / a.value;
  return compose(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Jet operator/(Jet a, Jet b) { return a * reciprocal(b); }

inline Jet log(Jet a) {
  const double inv = 1.0 / a.value;
  return compose(a, std::log(a.value), inv, -inv * inv);
}
inline Jet exp(Jet a) {
  const double e = std::exp(a.value);
  return compose(a, e, e, e);
}
inline Jet sqrt(Jet a) {
  const double s = std::sqrt(a.value);
  return compose(a, s, 0.5 / s, -0.25 / (s * a.value));
}
inline Jet pow(Jet a, double n) {
  const double v = std::pow(a.value, n);
  return compose(a, v, n * std::pow(a.value, n - 1.0),
                 n * (n - 1.0) * std::pow(a.value, n - 2.0));
}

}  // namespace pmrlhf
