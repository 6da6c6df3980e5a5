#include "lagvort/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/parallel.hpp"
#include "lagvort/random.hpp"

namespace lagvort {

namespace {

constexpr double kInvTwoPi = 0.5 / std::numbers::pi;

Vec2 blob(Vec2 d, double delta2) {
  const double r2 = norm2(d) + delta2;
  return (kInvTwoPi / r2) * perp(d);
}

}  // namespace

Domain Domain::disk(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw DomainError(fmt::format("disk radius must be positive and finite, got {}", radius));
  }
  return Domain(DomainKind::Disk, radius);
}

Domain Domain::plane() { return Domain(DomainKind::Plane, 0.0); }

bool Domain::contains(Vec2 p, double rel_tol) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  if (kind_ == DomainKind::Plane) return true;
  return norm(p) <= radius_ * (1.0 + rel_tol);
}

std::optional<double> Domain::area() const {
  if (kind_ == DomainKind::Plane) return std::nullopt;
  return std::numbers::pi * radius_ * radius_;
}

std::optional<Box> Domain::bounding_box() const {
  if (kind_ == DomainKind::Plane) return std::nullopt;
  return Box{{-radius_, -radius_}, {radius_, radius_}};
}

std::string Domain::name() const { return kind_ == DomainKind::Disk ? "disk" : "plane"; }

KernelSpec::KernelSpec(Domain d, double reg) : domain(d), delta(reg) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw DomainError(fmt::format("kernel regularization must be >= 0, got {}", delta));
  }
}

Vec2 plane_kernel(Vec2 x) {
  const double r2 = norm2(x);
  if (r2 == 0.0) throw SingularInputError("plane kernel evaluated at the origin");
  return (kInvTwoPi / r2) * perp(x);
}

std::optional<Vec2> image_point(Vec2 y, double radius) {
  const double r2 = norm2(y);
  if (r2 == 0.0) return std::nullopt;
  return (radius * radius / r2) * y;
}

Vec2 disk_kernel(Vec2 x, Vec2 y, double radius) {
  if (x == y) throw SingularInputError("disk kernel evaluated on the diagonal x = y");
  if (!(norm(x) < radius) || !(norm(y) < radius)) {
    throw DomainError(fmt::format("disk kernel needs interior points (|x| = {}, |y| = {}, R = {})", norm(x),
                                  norm(y), radius));
  }
  Vec2 k = plane_kernel(x - y);
  if (auto img = image_point(y, radius)) k -= plane_kernel(x - *img);
  return k;
}

Vec2 regularized_kernel(const KernelSpec& spec, Vec2 x, Vec2 y) {
  const double d2 = spec.delta * spec.delta;
  if (spec.delta == 0.0) {
    if (!spec.domain.is_disk()) return plane_kernel(x - y);
    if (x == y) throw SingularInputError("exact kernel evaluated on the diagonal x = y");
  }
  Vec2 k = blob(x - y, d2);
  if (spec.domain.is_disk()) {
    if (auto img = image_point(y, spec.domain.radius())) k -= blob(x - *img, d2);
  }
  return k;
}

double modulus_phi(double r) {
  if (r <= 0.0) return 0.0;
  if (r > 1.0) return 1.0;
  return r * (1.0 - std::log(r));
}

namespace {

// Integral over {x in disk : |x - a| <= |x - b|} \ B(a, r_ex) of |K(x,a) - K(x,b)| in polar
// coordinates around a.
double half_integral(double radius, Vec2 a, Vec2 b, double r_ex, int resolution) {
  using Gauss = boost::math::quadrature::gauss<double, 8>;
  const auto& nodes = Gauss::abscissa();
  const auto& weights = Gauss::weights();

  const Vec2 ab = b - a;
  const double sep = norm(ab);
  const auto img_a = image_point(a, radius);
  const auto img_b = image_point(b, radius);
  const int n_theta = 16 * resolution;
  const int n_panels = 4 * resolution;
  const double dtheta = 2.0 * std::numbers::pi / n_theta;

  // Gauss nodes on [-1,1] listed for the nonnegative half; expand to the full rule.
  std::vector<std::pair<double, double>> rule;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    rule.emplace_back(nodes[i], weights[i]);
    if (nodes[i] != 0.0) rule.emplace_back(-nodes[i], weights[i]);
  }

  double total = 0.0;
  for (int it = 0; it < n_theta; ++it) {
    const double theta = (it + 0.5) * dtheta;
    const Vec2 e{std::cos(theta), std::sin(theta)};
    const double ae = dot(a, e);
    double r_max = -ae + std::sqrt(std::max(0.0, ae * ae + radius * radius - norm2(a)));
    const double toward = dot(e, ab);
    if (toward > 0.0) r_max = std::min(r_max, 0.5 * sep * sep / toward);
    if (r_max <= r_ex) continue;

    // Geometric panels resolve the near-singular scale set by the separation and r_ex.
    const double ratio = std::pow(r_max / r_ex, 1.0 / n_panels);
    double lo = r_ex;
    double line = 0.0;
    for (int p = 0; p < n_panels; ++p) {
      const double hi = (p + 1 == n_panels) ? r_max : lo * ratio;
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      for (const auto& [xi, w] : rule) {
        const double r = mid + half * xi;
        const Vec2 x = a + r * e;
        Vec2 diff = plane_kernel(x - a) - plane_kernel(x - b);
        if (img_a) diff -= plane_kernel(x - *img_a);
        if (img_b) diff += plane_kernel(x - *img_b);
        line += w * half * norm(diff) * r;
      }
      lo = hi;
    }
    total += line * dtheta;
  }
  return total;
}

}  // namespace

KernelDifferenceSample kernel_difference_integral(const Domain& disk, Vec2 a, Vec2 b, int resolution,
                                                  double c1_bound) {
  if (!disk.is_disk()) throw DomainError("kernel difference integral is defined on the disk only");
  const double sep = norm(b - a);
  if (!(sep > 0.0)) throw SingularInputError("kernel difference needs a != b");
  const double r_ex = std::min(1e-4 * disk.radius(), 1e-2 * sep);
  const double integral =
      half_integral(disk.radius(), a, b, r_ex, resolution) + half_integral(disk.radius(), b, a, r_ex, resolution);
  // Each excluded disk: int |K(.,a)| <= 2 pi C r_ex, and |K(.,b)| <= C / (sep - r_ex) there.
  const double pi = std::numbers::pi;
  const double bar = 2.0 * (2.0 * pi * c1_bound * r_ex + pi * r_ex * r_ex * c1_bound / (sep - r_ex));
  return {sep, integral, bar, (integral + bar) / modulus_phi(sep)};
}

namespace {

// Interior point at depth R 10^-u from the boundary, u uniform in [0, max_decades].
Vec2 near_boundary_point(Rng& rng, double radius, double max_decades) {
  const double depth = radius * std::pow(10.0, -rng.uniform(0.0, max_decades));
  const double r = std::max(0.0, radius - depth);
  return r * rng.unit_vector();
}

}  // namespace

KernelCalibration verify_kernel_estimates(const KernelSpec& spec, std::size_t samples, int resolution,
                                          double min_separation, std::uint64_t seed) {
  if (!spec.domain.is_disk()) throw DomainError("kernel calibration requires a disk domain");
  if (spec.delta != 0.0) throw DomainError("kernel calibration uses the exact kernel (delta = 0)");
  if (samples < 1) throw QuadratureError("kernel calibration needs at least one sample");
  if (resolution < 1) throw QuadratureError("kernel calibration needs resolution >= 1");
  const double radius = spec.domain.radius();

  KernelCalibration cal;
  cal.resolution = resolution;
  cal.min_separation = min_separation * radius;
  cal.max_separation = radius;

  // Decay constant: pairs where x sits close to the boundary and y at larger scales realize the
  // image-doubled sup, so depths and separations are both drawn across decades.
  cal.c1_pairs = 256 * samples;
  {
    Rng rng(seed);
    std::vector<std::pair<Vec2, Vec2>> pairs;
    pairs.reserve(cal.c1_pairs);
    while (pairs.size() < cal.c1_pairs) {
      const Vec2 x = (pairs.size() % 2 == 0) ? near_boundary_point(rng, radius, 6.0) : rng.in_disk(radius);
      const double s = radius * std::pow(10.0, -rng.uniform(0.0, 4.0));
      const Vec2 y = x + s * rng.unit_vector();
      if (!(norm(y) < radius) || !(norm(x) < radius) || x == y) continue;
      pairs.emplace_back(x, y);
    }
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      const auto& [x, y] = pairs[i];
      values[i] = norm(disk_kernel(x, y, radius)) * norm(x - y);
    });
    for (std::size_t i = 0; i < values.size(); ++i) {
      cal.c1 = std::max(cal.c1, values[i]);
      if (i < values.size() / 2) cal.c1_half = std::max(cal.c1_half, values[i]);
    }
  }

  cal.c2_pairs = samples;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::pair<Vec2, Vec2>> pairs;
  while (pairs.size() < samples) {
    const Vec2 a = (pairs.size() % 2 == 0) ? rng.in_disk(radius) : near_boundary_point(rng, radius, 3.0);
    const double s = radius * std::pow(10.0, -rng.uniform(0.0, -std::log10(min_separation)));
    const Vec2 b = a + s * rng.unit_vector();
    if (!(norm(b) < radius)) continue;
    pairs.emplace_back(a, b);
  }
  std::vector<KernelDifferenceSample> fine(samples), coarse(samples);
  parallel_for(samples, [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    coarse[i] = kernel_difference_integral(spec.domain, a, b, resolution, cal.c1);
    fine[i] = kernel_difference_integral(spec.domain, a, b, 2 * resolution, cal.c1);
  });
  for (std::size_t i = 0; i < samples; ++i) {
    const double change = std::abs(fine[i].ratio - coarse[i].ratio) / fine[i].ratio;
    if (!(change <= 0.05)) {
      throw QuadratureError(fmt::format(
          "kernel difference quadrature did not converge: ratio {} -> {} at separation {} (resolution {})",
          coarse[i].ratio, fine[i].ratio, fine[i].separation, resolution));
    }
    cal.c2 = std::max(cal.c2, fine[i].ratio);
    cal.c2_coarse = std::max(cal.c2_coarse, coarse[i].ratio);
    cal.max_error_bar = std::max(cal.max_error_bar, fine[i].error_bar);
  }
  return cal;
}

}  // namespace lagvort
