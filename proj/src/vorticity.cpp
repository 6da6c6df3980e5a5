#include "lagvort/vorticity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/random.hpp"

namespace lagvort {

namespace {

// exp(-1 / (1 - u^2)) on |u| < 1.
double bump(double u2) { return u2 < 1.0 ? std::exp(-1.0 / (1.0 - u2)) : 0.0; }

// 1 / int_{|u|<1} bump(|u|^2) du.
double bump_normalization() {
  static const double c = [] {
    auto f = [](double u) { return bump(u * u) * 2.0 * std::numbers::pi * u; };
    const double mass = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 12, 1e-15);
    return 1.0 / mass;
  }();
  return c;
}

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

bool disjoint(const std::vector<std::pair<Vec2, double>>& a, const std::vector<std::pair<Vec2, double>>& b) {
  for (const auto& [ca, ra] : a) {
    for (const auto& [cb, rb] : b) {
      if (norm(ca - cb) <= ra + rb) return false;
    }
  }
  return true;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("{} must be positive and finite, got {}", what, v));
}

}  // namespace

// Value of (1_{|y| < R} * rho_eps) at distance d from the center, tabulated on [R - eps, R + eps].
struct RadialProfile {
  double radius;
  double epsilon;
  double lo;
  double hi;
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;

  static double exact(double radius, double eps, double d) {
    const double c = bump_normalization() / (eps * eps);
    auto inside_fraction = [&](double s) {
      if (d == 0.0) return s <= radius ? 1.0 : 0.0;
      const double k = (radius * radius - d * d - s * s) / (2.0 * d * s);
      if (k >= 1.0) return 1.0;
      if (k <= -1.0) return 0.0;
      return 1.0 - std::acos(k) / std::numbers::pi;
    };
    auto f = [&](double s) {
      if (s <= 0.0) return 0.0;
      return c * bump((s / eps) * (s / eps)) * 2.0 * std::numbers::pi * s * inside_fraction(s);
    };
    // The fraction has kinks at s = |R - d| and s = R + d.
    std::vector<double> cuts{0.0};
    for (double k : {std::abs(radius - d), radius + d}) {
      if (k > 0.0 && k < eps) cuts.push_back(k);
    }
    cuts.push_back(eps);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 10, 1e-13);
    }
    return std::clamp(total, 0.0, 1.0);
  }

  static std::shared_ptr<const RadialProfile> build(double radius, double eps) {
    constexpr int kNodes = 2049;
    const double lo = std::max(0.0, radius - eps);
    const double hi = radius + eps;
    const double step = (hi - lo) / (kNodes - 1);
    std::vector<double> values(kNodes);
    for (int i = 0; i < kNodes; ++i) values[i] = exact(radius, eps, lo + i * step);
    values.front() = lo > 0.0 ? 1.0 : values.front();
    values.back() = 0.0;
    const double left_slope = lo > 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    auto spline = boost::math::interpolators::cardinal_cubic_b_spline<double>(values.begin(), values.end(), lo,
                                                                              step, left_slope, 0.0);
    return std::make_shared<const RadialProfile>(RadialProfile{radius, eps, lo, hi, std::move(spline)});
  }

  double operator()(double d) const {
    if (d >= hi) return 0.0;
    if (d <= lo) return lo > 0.0 ? 1.0 : spline(lo);
    return std::clamp(spline(d), 0.0, 1.0);
  }
};

VorticitySpec VorticitySpec::patch(Vec2 center, double radius, double amplitude) {
  check_positive(radius, "patch radius");
  if (!std::isfinite(amplitude)) throw ConfigError("patch amplitude must be finite");
  return VorticitySpec(DiskPatch{center, radius, amplitude});
}

VorticitySpec VorticitySpec::mollified(const DiskPatch& base, double epsilon) {
  check_positive(base.radius, "patch radius");
  check_positive(epsilon, "mollifier radius");
  return VorticitySpec(MollifiedPatch{base, epsilon, RadialProfile::build(base.radius, epsilon)});
}

VorticitySpec VorticitySpec::oscillatory(const VorticitySpec& base, double amplitude, int frequency, int axis) {
  if (!std::isfinite(amplitude)) throw ConfigError("oscillation amplitude must be finite");
  if (frequency < 0) throw ConfigError(fmt::format("oscillation frequency must be >= 0, got {}", frequency));
  if (axis != 0 && axis != 1) throw ConfigError(fmt::format("oscillation axis must be 0 or 1, got {}", axis));
  return VorticitySpec(Oscillatory{std::make_shared<const VorticitySpec>(base), amplitude, frequency, axis});
}

VorticitySpec VorticitySpec::sum(std::vector<VorticitySpec> terms) {
  if (terms.empty()) throw ConfigError("a sum of vorticity specs needs at least one term");
  return VorticitySpec(SumSpec{std::move(terms)});
}

std::string VorticitySpec::kind() const {
  return std::visit(overloaded{[](const DiskPatch&) { return std::string("disk_patch"); },
                               [](const MollifiedPatch&) { return std::string("mollified_patch"); },
                               [](const Oscillatory&) { return std::string("oscillatory"); },
                               [](const SumSpec&) { return std::string("sum"); }},
                    v_);
}

double VorticitySpec::operator()(Vec2 x) const {
  return std::visit(overloaded{
                        [&](const DiskPatch& p) { return norm2(x - p.center) <= p.radius * p.radius ? p.amplitude : 0.0; },
                        [&](const MollifiedPatch& m) { return m.base.amplitude * (*m.profile)(norm(x - m.base.center)); },
                        [&](const Oscillatory& o) {
                          const double b = (*o.base)(x);
                          if (o.amplitude == 0.0 || !o.base->in_support(x)) return b;
                          const double coord = o.axis == 0 ? x.x : x.y;
                          return b + o.amplitude * std::sin(o.frequency * coord);
                        },
                        [&](const SumSpec& s) {
                          double total = 0.0;
                          for (const auto& t : s.terms) total += t(x);
                          return total;
                        }},
                    v_);
}

double VorticitySpec::sup_norm() const {
  return std::visit(overloaded{[](const DiskPatch& p) { return std::abs(p.amplitude); },
                               [](const MollifiedPatch& m) { return std::abs(m.base.amplitude); },
                               [](const Oscillatory& o) { return o.base->sup_norm() + std::abs(o.amplitude); },
                               [](const SumSpec& s) {
                                 bool separate = true;
                                 for (std::size_t i = 0; i < s.terms.size() && separate; ++i) {
                                   for (std::size_t j = i + 1; j < s.terms.size() && separate; ++j) {
                                     separate = disjoint(s.terms[i].support_disks(), s.terms[j].support_disks());
                                   }
                                 }
                                 double acc = 0.0;
                                 for (const auto& t : s.terms) acc = separate ? std::max(acc, t.sup_norm()) : acc + t.sup_norm();
                                 return acc;
                               }},
                    v_);
}

std::pair<double, double> VorticitySpec::value_range() const {
  auto patch_range = [](double a) { return std::pair{std::min(0.0, a), std::max(0.0, a)}; };
  return std::visit(overloaded{[&](const DiskPatch& p) { return patch_range(p.amplitude); },
                               [&](const MollifiedPatch& m) { return patch_range(m.base.amplitude); },
                               [](const Oscillatory& o) {
                                 auto [lo, hi] = o.base->value_range();
                                 return std::pair{lo - std::abs(o.amplitude), hi + std::abs(o.amplitude)};
                               },
                               [](const SumSpec& s) {
                                 bool separate = true;
                                 for (std::size_t i = 0; i < s.terms.size() && separate; ++i) {
                                   for (std::size_t j = i + 1; j < s.terms.size() && separate; ++j) {
                                     separate = disjoint(s.terms[i].support_disks(), s.terms[j].support_disks());
                                   }
                                 }
                                 double lo = 0.0, hi = 0.0;
                                 for (const auto& t : s.terms) {
                                   auto [a, b] = t.value_range();
                                   lo = separate ? std::min(lo, a) : lo + a;
                                   hi = separate ? std::max(hi, b) : hi + b;
                                 }
                                 return std::pair{lo, hi};
                               }},
                    v_);
}

std::vector<std::pair<Vec2, double>> VorticitySpec::support_disks() const {
  return std::visit(overloaded{[](const DiskPatch& p) { return std::vector<std::pair<Vec2, double>>{{p.center, p.radius}}; },
                               [](const MollifiedPatch& m) {
                                 return std::vector<std::pair<Vec2, double>>{{m.base.center, m.base.radius + m.epsilon}};
                               },
                               [](const Oscillatory& o) { return o.base->support_disks(); },
                               [](const SumSpec& s) {
                                 std::vector<std::pair<Vec2, double>> out;
                                 for (const auto& t : s.terms) {
                                   auto d = t.support_disks();
                                   out.insert(out.end(), d.begin(), d.end());
                                 }
                                 return out;
                               }},
                    v_);
}

bool VorticitySpec::in_support(Vec2 x) const {
  for (const auto& [c, r] : support_disks()) {
    if (norm2(x - c) <= r * r) return true;
  }
  return false;
}

Box VorticitySpec::support_box() const {
  const auto disks = support_disks();
  Box box{disks[0].first - Vec2{disks[0].second, disks[0].second}, disks[0].first + Vec2{disks[0].second, disks[0].second}};
  for (const auto& [c, r] : disks) box = merge(box, Box{c - Vec2{r, r}, c + Vec2{r, r}});
  return box;
}

VorticitySpec VorticitySpec::translated(Vec2 d) const {
  return std::visit(overloaded{[&](const DiskPatch& p) { return VorticitySpec(DiskPatch{p.center + d, p.radius, p.amplitude}); },
                               [&](const MollifiedPatch& m) {
                                 MollifiedPatch out = m;
                                 out.base.center += d;
                                 return VorticitySpec(out);
                               },
                               [](const Oscillatory&) -> VorticitySpec {
                                 throw ConfigError("oscillatory vorticity cannot be translated");
                               },
                               [&](const SumSpec& s) {
                                 std::vector<VorticitySpec> terms;
                                 for (const auto& t : s.terms) terms.push_back(t.translated(d));
                                 return VorticitySpec(SumSpec{std::move(terms)});
                               }},
                    v_);
}

nlohmann::json VorticitySpec::to_json() const {
  using nlohmann::json;
  auto patch_json = [](const DiskPatch& p) {
    return json{{"kind", "disk_patch"}, {"center", {p.center.x, p.center.y}}, {"radius", p.radius}, {"amplitude", p.amplitude}};
  };
  return std::visit(overloaded{[&](const DiskPatch& p) { return patch_json(p); },
                               [&](const MollifiedPatch& m) {
                                 return json{{"kind", "mollified_patch"}, {"base", patch_json(m.base)}, {"epsilon", m.epsilon}};
                               },
                               [](const Oscillatory& o) {
                                 return json{{"kind", "oscillatory"},
                                             {"base", o.base->to_json()},
                                             {"amplitude", o.amplitude},
                                             {"frequency", o.frequency},
                                             {"axis", o.axis}};
                               },
                               [](const SumSpec& s) {
                                 json terms = json::array();
                                 for (const auto& t : s.terms) terms.push_back(t.to_json());
                                 return json{{"kind", "sum"}, {"terms", terms}};
                               }},
                    v_);
}

VorticitySpec VorticitySpec::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto read_patch = [](const nlohmann::json& p) {
      if (p.at("kind").get<std::string>() != "disk_patch") throw ConfigError("mollified_patch base must be a disk_patch");
      const auto& c = p.at("center");
      return DiskPatch{{c.at(0).get<double>(), c.at(1).get<double>()}, p.at("radius").get<double>(),
                       p.at("amplitude").get<double>()};
    };
    if (kind == "disk_patch") {
      const DiskPatch p = read_patch(j);
      return patch(p.center, p.radius, p.amplitude);
    }
    if (kind == "mollified_patch") return mollified(read_patch(j.at("base")), j.at("epsilon").get<double>());
    if (kind == "oscillatory") {
      return oscillatory(from_json(j.at("base")), j.at("amplitude").get<double>(), j.at("frequency").get<int>(),
                         j.value("axis", 0));
    }
    if (kind == "sum") {
      std::vector<VorticitySpec> terms;
      for (const auto& t : j.at("terms")) terms.push_back(from_json(t));
      return sum(std::move(terms));
    }
    throw ConfigError(fmt::format("unknown vorticity kind '{}'", kind));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed vorticity spec: {}", e.what()));
  }
}

double eval_initial(const VorticitySpec& spec, Vec2 x) { return spec(x); }

void check_support(const VorticitySpec& spec, const Domain& domain, double h) {
  if (!domain.is_disk()) return;
  const double R = domain.radius();
  auto check = [&](Vec2 c, double reach) {
    if (!(norm(c) + reach < R)) {
      throw DomainError(fmt::format("vorticity support (center ({}, {}), reach {}) is not strictly inside the disk of radius {}",
                                    c.x, c.y, reach, R));
    }
  };
  std::visit(overloaded{[&](const DiskPatch& p) { check(p.center, p.radius); },
                        [&](const MollifiedPatch& m) { check(m.base.center, m.base.radius + m.epsilon + h); },
                        [&](const Oscillatory& o) { check_support(*o.base, domain, h); },
                        [&](const SumSpec& s) {
                          for (const auto& t : s.terms) check_support(t, domain, h);
                        }},
             spec.variant());
}

void check_resolvable(const VorticitySpec& spec, double h) {
  std::visit(overloaded{[](const DiskPatch&) {}, [](const MollifiedPatch&) {},
                        [&](const Oscillatory& o) {
                          if (o.amplitude != 0.0 && o.frequency > 1.0 / (4.0 * h) * (1.0 + 1e-12)) {
                            throw ResolutionError(fmt::format(
                                "oscillation frequency {} is not resolvable at h = {} (needs n <= {})", o.frequency, h,
                                1.0 / (4.0 * h)));
                          }
                          check_resolvable(*o.base, h);
                        },
                        [&](const SumSpec& s) {
                          for (const auto& t : s.terms) check_resolvable(t, h);
                        }},
             spec.variant());
}

Mollifier::Mollifier(double epsilon) : eps_(epsilon) {
  check_positive(epsilon, "mollifier radius");
  c_ = bump_normalization() / (epsilon * epsilon);
}

double Mollifier::operator()(Vec2 x) const { return c_ * bump(norm2(x) / (eps_ * eps_)); }

double Mollifier::grid_mass(int resolution) const {
  const double step = eps_ / resolution;
  double mass = 0.0;
  for (int i = 0; i < 2 * resolution; ++i) {
    for (int j = 0; j < 2 * resolution; ++j) {
      mass += (*this)({(i + 0.5) * step - eps_, (j + 0.5) * step - eps_});
    }
  }
  return mass * step * step;
}

double mollify(const VorticitySpec& spec, double epsilon, Vec2 x, int resolution) {
  if (resolution < 8) {
    throw ResolutionError(fmt::format("mollifier quadrature needs at least 8 points across eps, got {}", resolution));
  }
  const Mollifier rho(epsilon);
  const double step = epsilon / resolution;
  double weight = 0.0;
  double acc = 0.0;
  for (int i = 0; i < 2 * resolution; ++i) {
    for (int j = 0; j < 2 * resolution; ++j) {
      const Vec2 off{(i + 0.5) * step - epsilon, (j + 0.5) * step - epsilon};
      const double w = rho(off);
      if (w == 0.0) continue;
      weight += w;
      acc += w * spec(x - off);
    }
  }
  return acc / weight;
}

std::vector<VorticitySpec> make_weak_star_family(const VorticitySpec& base, double amplitude,
                                                 std::span<const int> frequencies, int axis) {
  for (std::size_t i = 1; i < frequencies.size(); ++i) {
    if (frequencies[i] <= frequencies[i - 1]) throw ConfigError("weak-* frequencies must be increasing");
  }
  std::vector<VorticitySpec> family;
  family.reserve(frequencies.size());
  for (int n : frequencies) family.push_back(amplitude == 0.0 ? base : VorticitySpec::oscillatory(base, amplitude, n, axis));
  return family;
}

double holder_seminorm(const VorticitySpec& spec, double epsilon, double alpha, std::size_t pairs,
                       double min_separation, int resolution, std::uint64_t seed) {
  std::optional<VorticitySpec> smooth;
  if (const auto* p = std::get_if<DiskPatch>(&spec.variant())) smooth = VorticitySpec::mollified(*p, epsilon);
  auto f = [&](Vec2 x) { return smooth ? (*smooth)(x) : mollify(spec, epsilon, x, resolution); };
  const Box box = spec.support_box().expanded(epsilon);
  const double max_separation = 4.0 * epsilon;
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Vec2 x = rng.in_box(box);
    const double s = min_separation * std::pow(max_separation / min_separation, rng.uniform());
    const Vec2 y = x + s * rng.unit_vector();
    best = std::max(best, std::abs(f(x) - f(y)) / std::pow(s, alpha));
  }
  return best;
}

}  // namespace lagvort
