#pragma once

#include <cstdint>
#include <random>

#include "lagvort/vec2.hpp"

namespace lagvort {

// mt19937_64 with distribution code of our own, so sample streams do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  Vec2 unit_vector();
  // Uniform in the disk of radius r centered at the origin.
  Vec2 in_disk(double r);
  Vec2 in_box(const Box& b) { return {uniform(b.lo.x, b.hi.x), uniform(b.lo.y, b.hi.y)}; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lagvort
