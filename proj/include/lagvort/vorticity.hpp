#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lagvort/kernel.hpp"
#include "lagvort/vec2.hpp"

namespace lagvort {

struct DiskPatch {
  Vec2 center;
  double radius = 0.0;
  double amplitude = 0.0;
};

class VorticitySpec;
struct RadialProfile;

// Indicator of a disk convolved with the bump mollifier of radius eps. The radial profile is
// tabulated once on construction.
struct MollifiedPatch {
  DiskPatch base;
  double epsilon = 0.0;
  std::shared_ptr<const RadialProfile> profile;
};

// base(x) + A sin(n x_axis) on the support of base.
struct Oscillatory {
  std::shared_ptr<const VorticitySpec> base;
  double amplitude = 0.0;
  int frequency = 0;
  int axis = 0;  // 0: x1, 1: x2
};

struct SumSpec {
  std::vector<VorticitySpec> terms;
};

class VorticitySpec {
 public:
  using Variant = std::variant<DiskPatch, MollifiedPatch, Oscillatory, SumSpec>;

  VorticitySpec() : v_(DiskPatch{}) {}
  static VorticitySpec patch(Vec2 center, double radius, double amplitude);
  static VorticitySpec mollified(const DiskPatch& base, double epsilon);
  static VorticitySpec oscillatory(const VorticitySpec& base, double amplitude, int frequency, int axis = 0);
  static VorticitySpec sum(std::vector<VorticitySpec> terms);

  const Variant& variant() const { return v_; }
  std::string kind() const;

  double operator()(Vec2 x) const;
  // Closed-form sup |omega_0|. For sums with overlapping supports this is the sum of the parts' norms.
  double sup_norm() const;
  // [ess inf, ess sup] including the zero field outside the support.
  std::pair<double, double> value_range() const;
  // Disks whose union is the (closed) support.
  std::vector<std::pair<Vec2, double>> support_disks() const;
  bool in_support(Vec2 x) const;
  Box support_box() const;

  // omega_0(x - d). Not defined for oscillatory terms.
  VorticitySpec translated(Vec2 d) const;

  nlohmann::json to_json() const;
  static VorticitySpec from_json(const nlohmann::json& j);

 private:
  explicit VorticitySpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

double eval_initial(const VorticitySpec& spec, Vec2 x);

// Throws DomainError unless the support lies strictly inside the domain, with clearance eps + h
// for mollified data.
void check_support(const VorticitySpec& spec, const Domain& domain, double h);

// Throws ResolutionError when an oscillatory term has frequency above 1 / (4 h).
void check_resolvable(const VorticitySpec& spec, double h);

// rho_eps(x) = c exp(-1 / (1 - |x/eps|^2)) on |x| < eps, unit mass.
class Mollifier {
 public:
  explicit Mollifier(double epsilon);
  double epsilon() const { return eps_; }
  double operator()(Vec2 x) const;
  // Midpoint-grid mass with `resolution` cells per eps.
  double grid_mass(int resolution) const;

 private:
  double eps_;
  double c_;
};

// (omega_0 * rho_eps)(x) by a cell-centered grid on the eps-ball with `resolution` cells per eps.
// The discrete weights are normalized, so constants are reproduced and values stay in the range
// of omega_0. Throws ResolutionError for resolution < 8.
double mollify(const VorticitySpec& spec, double epsilon, Vec2 x, int resolution);

// A = 0 or the family base + A sin(n x_axis) for each n.
std::vector<VorticitySpec> make_weak_star_family(const VorticitySpec& base, double amplitude,
                                                 std::span<const int> frequencies, int axis = 0);

// Largest sampled |f(x) - f(y)| / |x - y|^alpha for f = mollify(spec, eps), over `pairs` random
// pairs near the support with separations down to `min_separation`.
double holder_seminorm(const VorticitySpec& spec, double epsilon, double alpha, std::size_t pairs,
                       double min_separation, int resolution, std::uint64_t seed = 7);

class FlowHistory;

// omega(x, t) = omega_0(X_{t,0}(x)).
double eval_solution(const FlowHistory& history, const VorticitySpec& spec, Vec2 x, double t);
std::vector<double> eval_solution(const FlowHistory& history, const VorticitySpec& spec,
                                  std::span<const Vec2> points, double t);

}  // namespace lagvort
