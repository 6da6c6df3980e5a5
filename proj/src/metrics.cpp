#include "lagvort/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/parallel.hpp"
#include "lagvort/random.hpp"

namespace lagvort {

namespace {

// Uniform bins over a point cloud for radius queries.
class PointBins {
 public:
  PointBins(std::span<const Vec2> pts, double cell) : pts_(pts), cell_(cell) {
    lo_ = pts[0];
    Vec2 hi = pts[0];
    for (const Vec2& p : pts) {
      lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    nx_ = static_cast<long>((hi.x - lo_.x) / cell_) + 1;
    ny_ = static_cast<long>((hi.y - lo_.y) / cell_) + 1;
    start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    std::vector<std::size_t> bin(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bin[i] = static_cast<std::size_t>(index(cell_of(pts[i].x, lo_.x, nx_), cell_of(pts[i].y, lo_.y, ny_)));
      ++start_[bin[i] + 1];
    }
    for (std::size_t b = 1; b < start_.size(); ++b) start_[b] += start_[b - 1];
    items_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[bin[i]]++] = i;
  }

  // Distance from point i to its nearest other point.
  double nearest_other(std::size_t i) const {
    const Vec2 p = pts_[i];
    const long cx = cell_of(p.x, lo_.x, nx_), cy = cell_of(p.y, lo_.y, ny_);
    double best2 = INFINITY;
    for (long ring = 0; ring <= std::max(nx_, ny_); ++ring) {
      // Points in ring k are at least (k - 1) cells away.
      if (ring > 0 && (ring - 1) * cell_ * (ring - 1) * cell_ > best2) break;
      for (long j = cy - ring; j <= cy + ring; ++j) {
        for (long k = cx - ring; k <= cx + ring; ++k) {
          if (std::max(std::abs(j - cy), std::abs(k - cx)) != ring) continue;
          if (j < 0 || j >= ny_ || k < 0 || k >= nx_) continue;
          const long b = index(k, j);
          for (std::size_t m = start_[b]; m < start_[b + 1]; ++m) {
            if (items_[m] == i) continue;
            best2 = std::min(best2, norm2(pts_[items_[m]] - p));
          }
        }
      }
    }
    return std::sqrt(best2);
  }

  // Some point within `radius` <= cell of x.
  bool any_within(Vec2 x, double radius) const {
    const double r2 = radius * radius;
    const long cx = static_cast<long>(std::floor((x.x - lo_.x) / cell_));
    const long cy = static_cast<long>(std::floor((x.y - lo_.y) / cell_));
    for (long j = std::max(0L, cy - 1); j <= std::min(ny_ - 1, cy + 1); ++j) {
      for (long k = std::max(0L, cx - 1); k <= std::min(nx_ - 1, cx + 1); ++k) {
        const long b = index(k, j);
        for (std::size_t m = start_[b]; m < start_[b + 1]; ++m) {
          if (norm2(pts_[items_[m]] - x) <= r2) return true;
        }
      }
    }
    return false;
  }

 private:
  long cell_of(double v, double lo, long n) const {
    return std::clamp(static_cast<long>((v - lo) / cell_), 0L, n - 1);
  }
  long index(long i, long j) const { return j * nx_ + i; }

  std::span<const Vec2> pts_;
  double cell_;
  Vec2 lo_;
  long nx_ = 1, ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
};

void check_spacing(double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ConfigError(fmt::format("quadrature spacing must be positive, got {}", spacing));
  }
}

const FlowHistory& history_of(const Solution& sol) {
  if (sol.history == nullptr) throw HistoryError("solution has no flow history");
  return *sol.history;
}

template <class F>
double deterministic_sum(std::size_t n, F&& term) {
  // Fixed-size blocks, summed in order, so the reduction does not depend on the worker count.
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    double s = 0.0;
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) s += term(i);
    partial[b] = s;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

void check_comparable(const FlowHistory& a, const FlowHistory& b) {
  if (!(a.domain() == b.domain())) throw HistoryError("histories live on different domains");
  if (a.dt() != b.dt()) throw HistoryError(fmt::format("histories use different steps: {} vs {}", a.dt(), b.dt()));
  if (a.h() != b.h()) throw HistoryError(fmt::format("histories use different grids: h = {} vs {}", a.h(), b.h()));
}

}  // namespace

QuadratureGrid QuadratureGrid::lattice(const Box& box, double spacing, const Domain& domain) {
  check_spacing(spacing);
  QuadratureGrid g;
  g.spacing = spacing;
  const long i0 = static_cast<long>(std::ceil(box.lo.x / spacing - 0.5));
  const long i1 = static_cast<long>(std::floor(box.hi.x / spacing - 0.5));
  const long j0 = static_cast<long>(std::ceil(box.lo.y / spacing - 0.5));
  const long j1 = static_cast<long>(std::floor(box.hi.y / spacing - 0.5));
  for (long j = j0; j <= j1; ++j) {
    for (long i = i0; i <= i1; ++i) {
      const Vec2 p{(i + 0.5) * spacing, (j + 0.5) * spacing};
      if (domain.contains(p, 0.0)) g.points.push_back(p);
    }
  }
  return g;
}

Box solution_window(const Solution& sol, double t) {
  const FlowHistory& h = history_of(sol);
  Box box = sol.spec.support_box().expanded(1.25 * h.max_speed() * std::abs(t) + 2.0 * h.h());
  if (auto dom = h.domain().bounding_box()) box = intersect(box, *dom);
  return box;
}

QuadratureGrid solution_grid(std::span<const Solution> sols, double t, double spacing) {
  if (sols.empty()) throw ConfigError("no solutions to grid");
  Box box = solution_window(sols[0], t);
  for (std::size_t i = 1; i < sols.size(); ++i) box = merge(box, solution_window(sols[i], t));
  return QuadratureGrid::lattice(box, spacing, history_of(sols[0]).domain());
}

std::vector<double> solution_on_grid(const Solution& sol, const QuadratureGrid& grid, double t) {
  const FlowHistory& h = history_of(sol);
  const int k = h.index_of(t);
  std::vector<double> out(grid.size(), 0.0);
  if (grid.size() == 0 || h.particle_count() == 0) return out;
  if (k == 0) {
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = sol.spec(grid.points[i]);
    return out;
  }

  const auto pos = h.positions(k);
  const Box window = solution_window(sol, t);
  std::vector<std::size_t> active;
  if (pos.size() == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (window.contains(grid.points[i])) active.push_back(i);
    }
  } else {
    const PointBins nn(pos, h.h());
    std::vector<double> gap(pos.size());
    parallel_for(pos.size(), [&](std::size_t i) { gap[i] = nn.nearest_other(i); });
    const double reach = 3.0 * *std::max_element(gap.begin(), gap.end());
    const PointBins cloud(pos, reach);
    std::vector<char> keep(grid.size(), 0);
    parallel_for(grid.size(), [&](std::size_t i) {
      const Vec2 x = grid.points[i];
      keep[i] = window.contains(x) && cloud.any_within(x, reach);
    });
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (keep[i]) active.push_back(i);
    }
  }

  std::vector<Vec2> pts(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) pts[i] = grid.points[active[i]];
  const auto vals = eval_solution(h, sol.spec, pts, t);
  for (std::size_t i = 0; i < active.size(); ++i) out[active[i]] = vals[i];
  return out;
}

double grid_lp(std::span<const double> a, std::span<const double> b, double p, double cell_area) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError(fmt::format("L^p exponent must be in [1, inf), got {}", p));
  if (a.size() != b.size()) throw ConfigError("grid values of different sizes");
  const double s = deterministic_sum(a.size(), [&](std::size_t i) {
    const double d = std::abs(a[i] - b[i]);
    return p == 1.0 ? d : std::pow(d, p);
  });
  return std::pow(s * cell_area, 1.0 / p);
}

double lp_distance(const Solution& a, const Solution& b, double p, double t, double spacing) {
  check_comparable(history_of(a), history_of(b));
  const Solution both[] = {a, b};
  const QuadratureGrid grid = solution_grid(both, t, spacing);
  const auto va = solution_on_grid(a, grid, t);
  const auto vb = solution_on_grid(b, grid, t);
  return grid_lp(va, vb, p, grid.cell_area());
}

double lp_norm(const Solution& sol, double p, double t, double spacing) {
  const QuadratureGrid grid = solution_grid(std::span<const Solution>(&sol, 1), t, spacing);
  const auto v = solution_on_grid(sol, grid, t);
  const std::vector<double> zero(v.size(), 0.0);
  return grid_lp(v, zero, p, grid.cell_area());
}

double weak_pairing(const Solution& sol, const ScalarField& f, double t, double spacing) {
  const QuadratureGrid grid = solution_grid(std::span<const Solution>(&sol, 1), t, spacing);
  const auto v = solution_on_grid(sol, grid, t);
  return grid.cell_area() * deterministic_sum(v.size(), [&](std::size_t i) {
           return v[i] == 0.0 ? 0.0 : v[i] * f(grid.points[i]);
         });
}

TestFunction gaussian_test_function(Vec2 center, double width) {
  if (!(width > 0.0)) throw ConfigError(fmt::format("test function width must be positive, got {}", width));
  const double w2 = width * width;
  TestFunction tf;
  tf.value = [=](Vec2 x, double) { return std::exp(-norm2(x - center) / w2); };
  tf.gradient = [=](Vec2 x, double) {
    const Vec2 d = x - center;
    return (-2.0 / w2 * std::exp(-norm2(d) / w2)) * d;
  };
  tf.time_derivative = [](Vec2, double) { return 0.0; };
  return tf;
}

double weakform_residual(const Solution& sol, const TestFunction& phi, double t1, double t2, double spacing,
                         int stride) {
  const FlowHistory& h = history_of(sol);
  const int k1 = h.index_of(t1), k2 = h.index_of(t2);
  if (k2 <= k1) throw ConfigError(fmt::format("weak-form window needs t1 < t2, got [{}, {}]", t1, t2));
  if (stride < 1) throw ConfigError(fmt::format("time stride must be >= 1, got {}", stride));
  std::vector<int> nodes;
  for (int k = k1; k < k2; k += stride) nodes.push_back(k);
  nodes.push_back(k2);

  std::vector<double> integrand(nodes.size());
  double g1 = 0.0, g2 = 0.0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const int k = nodes[n];
    const double t = h.time(k);
    const QuadratureGrid grid = solution_grid(std::span<const Solution>(&sol, 1), t, spacing);
    const auto w = solution_on_grid(sol, grid, t);
    std::vector<Vec2> pts;
    std::vector<double> wv;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0) {
        pts.push_back(grid.points[i]);
        wv.push_back(w[i]);
      }
    }
    const auto u = h.field(k).evaluate(pts);
    const double a = grid.cell_area();
    integrand[n] = a * deterministic_sum(pts.size(), [&](std::size_t i) {
                     return wv[i] * (phi.time_derivative(pts[i], t) + dot(u[i], phi.gradient(pts[i], t)));
                   });
    if (n == 0 || n + 1 == nodes.size()) {
      const double g = a * deterministic_sum(pts.size(), [&](std::size_t i) { return wv[i] * phi.value(pts[i], t); });
      (n == 0 ? g1 : g2) = g;
    }
  }
  double time_integral = 0.0;
  for (std::size_t n = 0; n + 1 < nodes.size(); ++n) {
    time_integral += 0.5 * (h.time(nodes[n + 1]) - h.time(nodes[n])) * (integrand[n] + integrand[n + 1]);
  }
  return std::abs(time_integral - (g2 - g1));
}

EtaTracers eta_tracers(const Domain& domain, const VorticitySpec& a, const VorticitySpec& b, double spacing) {
  check_spacing(spacing);
  EtaTracers tr;
  if (domain.is_disk()) {
    const auto g = QuadratureGrid::lattice(*domain.bounding_box(), spacing, domain);
    tr.points = g.points;
    tr.weights.assign(g.size(), g.cell_area());
    tr.normalization = g.cell_area() * static_cast<double>(g.size());
  } else {
    const auto g = QuadratureGrid::lattice(merge(a.support_box(), b.support_box()), spacing, domain);
    for (const Vec2& p : g.points) {
      if (a.in_support(p) || b.in_support(p)) tr.points.push_back(p);
    }
    tr.weights.assign(tr.points.size(), 1.0);
    tr.normalization = static_cast<double>(tr.points.size());
  }
  if (tr.points.empty()) throw ResolutionError(fmt::format("no eta tracers at spacing {}", spacing));
  return tr;
}

namespace {

double mean_separation(std::span<const Vec2> x1, std::span<const Vec2> x2, const EtaTracers& tr) {
  return deterministic_sum(x1.size(), [&](std::size_t i) { return tr.weights[i] * norm(x1[i] - x2[i]); }) /
         tr.normalization;
}

}  // namespace

double eta(const FlowHistory& h1, const FlowHistory& h2, double t, double r, const EtaTracers& tracers) {
  check_comparable(h1, h2);
  if (h1.index_of(t) == h1.index_of(r)) return 0.0;
  const auto x1 = transport(h1, tracers.points, t, r);
  const auto x2 = transport(h2, tracers.points, t, r);
  return mean_separation(x1, x2, tracers);
}

std::vector<std::vector<double>> eta_table(const FlowHistory& h1, const FlowHistory& h2,
                                           std::span<const double> times, const EtaTracers& tracers) {
  check_comparable(h1, h2);
  std::vector<int> idx(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) idx[i] = h1.index_of(times[i]);
  std::vector<std::vector<double>> table(times.size(), std::vector<double>(times.size(), 0.0));
  for (std::size_t a = 0; a < times.size(); ++a) {
    // One sweep up and one down from t, stopping at each requested r on the way.
    for (int dir : {+1, -1}) {
      std::vector<std::size_t> order;
      for (std::size_t b = 0; b < times.size(); ++b) {
        if ((idx[b] - idx[a]) * dir > 0) order.push_back(b);
      }
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return idx[x] * dir < idx[y] * dir; });
      std::vector<Vec2> x1 = tracers.points, x2 = tracers.points;
      double from = times[a];
      for (std::size_t b : order) {
        x1 = transport(h1, x1, from, times[b]);
        x2 = transport(h2, x2, from, times[b]);
        from = times[b];
        table[a][b] = mean_separation(x1, x2, tracers);
      }
    }
  }
  return table;
}

namespace {

void check_bound(const StabilityBound& b) {
  if (!(b.C >= 0.0 && b.T >= 0.0 && b.M >= 0.0 && b.z >= 0.0)) {
    throw ConfigError(fmt::format("stability bound needs C, T, M, z >= 0, got {}, {}, {}, {}", b.C, b.T, b.M, b.z));
  }
}

// e^{1-a} x^a.
double osgood_shape(double x, double a) { return x == 0.0 ? 0.0 : std::exp(1.0 - a) * std::pow(x, a); }

}  // namespace

BoundValue osgood_eta_bound(const StabilityBound& b, double r) {
  check_bound(b);
  const double ctz = b.C * b.T * b.z;
  const double a = std::exp(-b.C * std::abs(r) * b.M);
  return {osgood_shape(ctz, a), ctz < std::exp(1.0 - std::exp(b.C * b.T * b.M))};
}

double phi_T_M(const StabilityBound& b) {
  check_bound(b);
  const double ct = b.C * b.T;
  const double ctz = ct * b.z;
  if (ctz == 0.0) return 0.0;
  return ctz + ct * b.M * modulus_phi(std::numbers::e * std::pow(ctz, std::exp(-ct * b.M)));
}

BoundValue eta_two_time_bound(const StabilityBound& b, double t, double r) {
  const double phi = phi_T_M(b);
  const double a = std::exp(-b.C * std::abs(t - r) * b.M);
  return {osgood_shape(phi, a), phi < std::exp(1.0 - std::exp(2.0 * b.C * b.T * b.M))};
}

double disk_symmetric_difference(double r, double d) {
  if (!(r > 0.0) || !(d >= 0.0)) throw ConfigError(fmt::format("need r > 0 and d >= 0, got r = {}, d = {}", r, d));
  const double disk = std::numbers::pi * r * r;
  if (d >= 2.0 * r) return 2.0 * disk;
  const double lens = 2.0 * r * r * std::acos(d / (2.0 * r)) - 0.5 * d * std::sqrt(4.0 * r * r - d * d);
  return 2.0 * (disk - lens);
}

LogLipschitzEstimate log_lipschitz_ratio(const Solution& sol, double t, std::size_t pairs, double s_min, double s_max,
                                         std::uint64_t seed) {
  const FlowHistory& h = history_of(sol);
  if (pairs < 1) throw ConfigError("need at least one pair");
  if (!(s_min > 0.0) || !(s_max >= s_min)) throw ConfigError(fmt::format("bad separation range [{}, {}]", s_min, s_max));
  const double M = sol.spec.sup_norm();
  if (!(M > 0.0)) throw ConfigError("log-Lipschitz ratio needs nonzero vorticity");
  const Domain& dom = h.domain();
  const Box region = dom.is_disk() ? *dom.bounding_box() : solution_window(sol, t);
  Rng rng(seed);
  std::vector<Vec2> pts;
  pts.reserve(2 * pairs);
  while (pts.size() < 2 * pairs) {
    const Vec2 x = rng.in_box(region);
    const Vec2 y = x + s_min * std::pow(s_max / s_min, rng.uniform()) * rng.unit_vector();
    if (!dom.contains(x, 0.0) || !dom.contains(y, 0.0)) continue;
    if (dom.is_disk() && (norm(x) >= dom.radius() || norm(y) >= dom.radius())) continue;
    pts.push_back(x);
    pts.push_back(y);
  }
  const auto u = h.field(h.index_of(t)).evaluate(pts);
  LogLipschitzEstimate est;
  est.pairs = pairs;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double s = norm(pts[2 * i + 1] - pts[2 * i]);
    est.max_ratio = std::max(est.max_ratio, norm(u[2 * i + 1] - u[2 * i]) / (M * modulus_phi(s)));
    est.max_speed_ratio = std::max({est.max_speed_ratio, norm(u[2 * i]) / M, norm(u[2 * i + 1]) / M});
  }
  return est;
}

HolderFit holder_exponent(const FlowHistory& history, double t, std::size_t pairs, double s_min, double s_max,
                          std::uint64_t seed) {
  if (pairs < 2) throw ConfigError(fmt::format("need at least 2 pairs, got {}", pairs));
  if (!(s_min >= history.h())) {
    throw ResolutionError(fmt::format("smallest separation {} is below the grid scale h = {}", s_min, history.h()));
  }
  const double octaves = s_max > s_min ? std::log2(s_max / s_min) : 0.0;
  if (octaves < 3.0) {
    throw ResolutionError(fmt::format("separations [{}, {}] span {:.2f} octaves, need 3", s_min, s_max, octaves));
  }
  const Domain& dom = history.domain();
  Box region = history.initial().particles.empty() ? Box{{-1, -1}, {1, 1}} : Box{history.initial().particles[0].label,
                                                                                 history.initial().particles[0].label};
  for (const auto& p : history.initial().particles) region = merge(region, Box{p.label, p.label});
  region = region.expanded(s_max);

  Rng rng(seed);
  std::vector<Vec2> pts;
  std::vector<double> sep;
  pts.reserve(2 * pairs);
  const double margin = dom.is_disk() ? dom.radius() * (1.0 - 1e-6) : INFINITY;
  while (sep.size() < pairs) {
    const Vec2 x = rng.in_box(region);
    const double s = s_min * std::exp2(octaves * rng.uniform());
    const Vec2 y = x + s * rng.unit_vector();
    if (norm(x) >= margin || norm(y) >= margin) continue;
    pts.push_back(x);
    pts.push_back(y);
    sep.push_back(s);
  }
  const auto img = transport(history, pts, 0.0, t);
  // Slope of log|X(x) - X(y)| on log|x - y|.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const double lx = std::log(norm(pts[2 * i + 1] - pts[2 * i]));
    const double ly = std::log(std::max(norm(img[2 * i + 1] - img[2 * i]), 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  HolderFit fit;
  fit.alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.pairs = pairs;
  fit.octaves = octaves;
  return fit;
}

}  // namespace lagvort
