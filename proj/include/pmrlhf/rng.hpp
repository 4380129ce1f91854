#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace pmrlhf {

// Seeded random stream. Only the engine (whose output sequence is fixed by
// the standard) is used; the distributions are implemented here so that
// draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from (seed, name). Adding a new name never
  // changes the draws of existing names.
  static Rng substream(std::uint64_t seed, std::string_view name);
  static Rng substream(std::uint64_t seed, std::string_view name,
                       std::uint64_t index);

  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  // Index drawn with probability proportional to weights (nonnegative,
  // positive total).
  std::size_t categorical(std::span<const double> weights);
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name,
                       std::uint64_t index = 0);

}  // namespace pmrlhf
