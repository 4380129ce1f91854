#include "pmrlhf/rng.hpp"

#include <cmath>
#include <numbers>

#include "pmrlhf/errors.hpp"

namespace pmrlhf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name,
                       std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(fnv1a(name)) ^
                    splitmix64(index + 0x632be59bd9b4e019ULL));
}

Rng Rng::substream(std::uint64_t seed, std::string_view name) {
  return Rng(mix_seed(seed, name, 0));
}

Rng Rng::substream(std::uint64_t seed, std::string_view name,
                   std::uint64_t index) {
  return Rng(mix_seed(seed, name, index));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  long double total = 0.0L;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("Rng::categorical: negative weight");
    total += w;
  }
  if (!(total > 0.0L)) throw DomainError("Rng::categorical: zero total weight");
  const long double u = uniform() * total;
  long double acc = 0.0L;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last_positive;
}

double Rng::normal() {
  // Box-Muller; u1 is kept away from 0.
  const double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pmrlhf
