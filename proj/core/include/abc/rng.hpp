#pragma once

#include <cstdint>

#include "abc/rational.hpp"

namespace abc {

// Counter-based generator: value i of a stream is a pure function of
// (seed, i), so disjoint counter ranges can be handed to workers and the
// merged result is independent of scheduling.
struct Rng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix(seed + (counter + 1) * 0x9e3779b97f4a7c15ull);
  }

  // dyadic m/2^53: exactly representable as a double and as a Rational,
  // so a sampled point means the same thing to both arithmetic worlds
  std::uint64_t dyadic53(std::uint64_t counter) const { return bits(counter) >> 11; }

  double uniform(std::uint64_t counter) const {
    return static_cast<double>(dyadic53(counter)) * 0x1.0p-53;
  }

  Rational uniform_rational(std::uint64_t counter) const {
    return Rational(Int(dyadic53(counter)), Int(1) << 53);
  }

  // substream for sample index i, component c (point coords, fiber, ...)
  std::uint64_t at(std::uint64_t i, std::uint64_t c) const { return i * 8 + c; }
};

}  // namespace abc
