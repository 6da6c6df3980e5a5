#include "lagvort/vec2.hpp"

#include <algorithm>
#include <numbers>

#include "lagvort/random.hpp"

namespace lagvort {

Box merge(const Box& a, const Box& b) {
  return {{std::min(a.lo.x, b.lo.x), std::min(a.lo.y, b.lo.y)},
          {std::max(a.hi.x, b.hi.x), std::max(a.hi.y, b.hi.y)}};
}

Box intersect(const Box& a, const Box& b) {
  return {{std::max(a.lo.x, b.lo.x), std::max(a.lo.y, b.lo.y)},
          {std::min(a.hi.x, b.hi.x), std::min(a.hi.y, b.hi.y)}};
}

Vec2 Rng::unit_vector() {
  const double angle = 2.0 * std::numbers::pi * uniform();
  return {std::cos(angle), std::sin(angle)};
}

Vec2 Rng::in_disk(double r) {
  const double rho = r * std::sqrt(uniform());
  return rho * unit_vector();
}

}  // namespace lagvort
