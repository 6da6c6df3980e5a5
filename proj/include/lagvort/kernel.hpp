#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "lagvort/vec2.hpp"

namespace lagvort {

enum class DomainKind { Disk, Plane };

// Disk of radius R centered at the origin, or the whole plane.
class Domain {
 public:
  static Domain disk(double radius);
  static Domain plane();

  DomainKind kind() const { return kind_; }
  bool is_disk() const { return kind_ == DomainKind::Disk; }
  // Zero for the plane.
  double radius() const { return radius_; }

  // Closed-domain membership with a relative slack of `rel_tol * R` on the disk.
  bool contains(Vec2 p, double rel_tol = 1e-12) const;
  std::optional<double> area() const;
  std::optional<Box> bounding_box() const;
  std::string name() const;

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  Domain(DomainKind kind, double radius) : kind_(kind), radius_(radius) {}
  DomainKind kind_;
  double radius_;
};

// Biot-Savart kernel of a domain with algebraic blob regularization; delta == 0 is exact.
struct KernelSpec {
  KernelSpec(Domain domain, double delta);

  Domain domain;
  double delta;
};

// K(x) = (-x2, x1) / (2 pi |x|^2).
Vec2 plane_kernel(Vec2 x);

// Method-of-images kernel of the disk of radius R: plane kernel at x - y minus the
// plane kernel at x - y*, y* = R^2 y / |y|^2. y = 0 has no image.
Vec2 disk_kernel(Vec2 x, Vec2 y, double radius);

// Velocity at x induced by a unit vortex at y: 1/|x-y|^2 is replaced by
// 1/(|x-y|^2 + delta^2), image term included on the disk.
Vec2 regularized_kernel(const KernelSpec& spec, Vec2 x, Vec2 y);

// Log-Lipschitz modulus: r (1 - ln r) on (0, 1], 1 beyond, 0 at the origin.
double modulus_phi(double r);

// Image point R^2 y / |y|^2; nullopt when y is the center.
std::optional<Vec2> image_point(Vec2 y, double radius);

struct KernelCalibration {
  double c1 = 0.0;          // sup |K(x,y)| |x-y| over the sampled pairs
  double c1_half = 0.0;     // same with half the pairs
  double c2 = 0.0;          // sup of the L1 kernel-difference ratio, fine quadrature
  double c2_coarse = 0.0;   // same at half the quadrature resolution
  double max_error_bar = 0.0;  // largest excluded-disk contribution added to C2
  std::size_t c1_pairs = 0;
  std::size_t c2_pairs = 0;
  int resolution = 0;
  double min_separation = 0.0;
  double max_separation = 0.0;

  // The single constant C(Omega) used by all stability bounds.
  double constant() const { return c1 > c2 ? c1 : c2; }
};

// One (a, b) pair of the L1 kernel-difference estimate.
struct KernelDifferenceSample {
  double separation;
  double integral;    // polar quadrature value
  double error_bar;   // analytic bound on the excluded disks
  double ratio;       // (integral + error_bar) / phi(separation)
};

// Quadrature of int_Omega |K(x,a) - K(x,b)| dx on the disk, split at the bisector of [a, b]
// with polar rules centered at a and b.
KernelDifferenceSample kernel_difference_integral(const Domain& disk, Vec2 a, Vec2 b, int resolution,
                                                  double c1_bound);

// Empirical constants of |K(x,y)| <= C/|x-y| and int |K(.,a) - K(.,b)| <= C phi(|a-b|).
// Requires a disk and the exact kernel. Throws QuadratureError when doubling the
// resolution moves any sampled ratio by more than 5%.
KernelCalibration verify_kernel_estimates(const KernelSpec& spec, std::size_t samples, int resolution,
                                          double min_separation = 1e-3, std::uint64_t seed = 20240611);

}  // namespace lagvort
