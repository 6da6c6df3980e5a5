#include "lagvort/flow.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lagvort/errors.hpp"

namespace lagvort {

namespace {

constexpr double kProjectRadius = 1.0 - 1e-12;
constexpr double kBlowUpRadius = 1.0 + 1e-6;
constexpr double kMinVorticity = 1e-14;

// Pulls disk points back inside. Particles (stats != nullptr) raise BlowUpError past the
// tolerance; tracers are only checked for finiteness.
void contain(std::vector<Vec2>& pts, const Domain& domain, ContainmentStats* stats) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vec2& p = pts[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw BlowUpError(fmt::format("point {} became non-finite", i));
    }
    if (!domain.is_disk()) continue;
    const double R = domain.radius();
    const double r = norm(p);
    if (r <= R * kProjectRadius) continue;
    if (stats != nullptr && r > R * kBlowUpRadius) {
      throw BlowUpError(fmt::format("particle {} left the disk: |x| = {} > R (1 + 1e-6) with R = {}", i, r, R));
    }
    p = (R * kProjectRadius / r) * p;
    if (stats != nullptr) {
      ++stats->projections;
      if (stats->projected.size() < pts.size()) stats->projected.resize(pts.size(), false);
      stats->projected[i] = true;
    }
  }
}

std::vector<Vec2> axpy(std::span<const Vec2> y, double a, std::span<const Vec2> k) {
  std::vector<Vec2> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
  return out;
}

double max_norm(std::span<const Vec2> v) {
  double m = 0.0;
  for (const Vec2& x : v) m = std::max(m, norm(x));
  return m;
}

}  // namespace

std::vector<Vec2> ParticleEnsemble::positions() const {
  std::vector<Vec2> out(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) out[i] = particles[i].position;
  return out;
}

std::vector<double> ParticleEnsemble::circulations() const {
  std::vector<double> out(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) out[i] = particles[i].circulation();
  return out;
}

double ParticleEnsemble::total_circulation() const {
  double total = 0.0;
  for (const Particle& p : particles) total += p.circulation();
  return total;
}

ParticleEnsemble seed_particles(const VorticitySpec& spec, const Domain& domain, double h, double delta) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError(fmt::format("grid spacing h must be positive, got {}", h));
  const double reg = delta < 0.0 ? 0.8 * h : delta;
  ParticleEnsemble ens;
  ens.domain = domain;
  ens.kernel = KernelSpec(domain, reg);
  const Box box = spec.support_box();
  const auto nx = static_cast<long>(std::ceil(box.width() / h - 1e-9));
  const auto ny = static_cast<long>(std::ceil(box.height() / h - 1e-9));
  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      const Vec2 x{box.lo.x + (i + 0.5) * h, box.lo.y + (j + 0.5) * h};
      const double w = spec(x);
      if (std::abs(w) < kMinVorticity || !domain.contains(x, 0.0)) continue;
      ens.particles.push_back({x, x, w, h * h});
    }
  }
  return ens;
}

ParticleEnsemble make_ensemble(const Domain& domain, double delta, std::span<const Vec2> positions,
                               std::span<const double> vorticity, std::span<const double> weights) {
  if (positions.size() != vorticity.size() || positions.size() != weights.size()) {
    throw Error("ensemble arrays differ in length");
  }
  ParticleEnsemble ens;
  ens.domain = domain;
  ens.kernel = KernelSpec(domain, delta);
  ens.particles.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!domain.contains(positions[i])) {
      throw DomainError(fmt::format("particle at ({}, {}) lies outside the {}", positions[i].x, positions[i].y, domain.name()));
    }
    ens.particles.push_back({positions[i], positions[i], vorticity[i], weights[i]});
  }
  return ens;
}

std::vector<Vec2> eval_velocity(const ParticleEnsemble& ensemble, std::span<const Vec2> targets,
                                const SummationStrategy& strategy) {
  if (ensemble.particles.empty()) throw Error("velocity of an empty ensemble");
  const auto pos = ensemble.positions();
  const auto circ = ensemble.circulations();
  return VelocityField(ensemble.domain, ensemble.kernel.delta, pos, circ, strategy).evaluate(targets);
}

ParticleEnsemble step_rk4(const ParticleEnsemble& ensemble, double dt, const SummationStrategy& strategy,
                          ContainmentStats* stats, double* max_speed) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw ConfigError(fmt::format("time step must be nonzero, got {}", dt));
  ContainmentStats local;
  ContainmentStats* st = stats != nullptr ? stats : &local;
  const Domain& dom = ensemble.domain;
  const double delta = ensemble.kernel.delta;
  const auto circ = ensemble.circulations();
  const auto p0 = ensemble.positions();
  auto velocity = [&](const std::vector<Vec2>& p) {
    return VelocityField(dom, delta, p, circ, strategy).evaluate(p);
  };

  const auto k1 = velocity(p0);
  if (max_speed != nullptr) *max_speed = max_norm(k1);
  auto p1 = axpy(p0, 0.5 * dt, k1);
  contain(p1, dom, st);
  const auto k2 = velocity(p1);
  auto p2 = axpy(p0, 0.5 * dt, k2);
  contain(p2, dom, st);
  const auto k3 = velocity(p2);
  auto p3 = axpy(p0, dt, k3);
  contain(p3, dom, st);
  const auto k4 = velocity(p3);

  ParticleEnsemble out = ensemble;
  std::vector<Vec2> next(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    next[i] = p0[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  contain(next, dom, st);
  for (std::size_t i = 0; i < p0.size(); ++i) out.particles[i].position = next[i];
  out.time = ensemble.time + dt;
  return out;
}

// ---------------------------------------------------------------------------------------------

FlowHistory::FlowHistory(ParticleEnsemble initial, double dt, double h, SummationStrategy strategy)
    : base_(std::move(initial)), dt_(dt), h_(h), strategy_(strategy) {
  if (!(dt > 0.0)) throw ConfigError(fmt::format("time step must be positive, got {}", dt));
  strategy_.validate();
  for (Particle& p : base_.particles) p.position = p.label;
  base_.time = 0.0;
  positions_.push_back(base_.positions());
  speed_.push_back(0.0);
  circulation_ = base_.circulations();
  containment_.projected.assign(base_.size(), false);
}

int FlowHistory::index_of(double t) const {
  const double k = std::round(t / dt_);
  if (!std::isfinite(t) || std::abs(t - k * dt_) > 1e-9 * dt_ || k < first_index() || k > last_index()) {
    throw HistoryError(fmt::format("t = {} is not a snapshot time of the history on [{}, {}] with dt = {}", t, t_min(),
                                   t_max(), dt_));
  }
  return static_cast<int>(k);
}

bool FlowHistory::has_time(double t) const {
  try {
    index_of(t);
    return true;
  } catch (const HistoryError&) {
    return false;
  }
}

std::span<const Vec2> FlowHistory::positions(int k) const {
  if (k < first_index() || k > last_index()) throw HistoryError(fmt::format("snapshot index {} out of range", k));
  return positions_[static_cast<std::size_t>(k - first_)];
}

ParticleEnsemble FlowHistory::snapshot(int k) const {
  ParticleEnsemble ens = base_;
  const auto pos = positions(k);
  for (std::size_t i = 0; i < pos.size(); ++i) ens.particles[i].position = pos[i];
  ens.time = time(k);
  return ens;
}

double FlowHistory::max_speed(int k) const {
  positions(k);
  return speed_[static_cast<std::size_t>(k - first_)];
}

double FlowHistory::max_speed() const { return *std::max_element(speed_.begin(), speed_.end()); }

std::size_t FlowHistory::projected_particles() const {
  return static_cast<std::size_t>(std::count(containment_.projected.begin(), containment_.projected.end(), true));
}

bool FlowHistory::valid() const {
  return static_cast<double>(projected_particles()) <= 1e-3 * static_cast<double>(particle_count());
}

void FlowHistory::append(std::vector<Vec2> positions, double speed) {
  if (positions.size() != particle_count()) throw HistoryError("snapshot particle count mismatch");
  positions_.push_back(std::move(positions));
  speed_.push_back(speed);
}

void FlowHistory::prepend(std::vector<Vec2> positions, double speed) {
  if (positions.size() != particle_count()) throw HistoryError("snapshot particle count mismatch");
  positions_.insert(positions_.begin(), std::move(positions));
  speed_.insert(speed_.begin(), speed);
  --first_;
}

void FlowHistory::set_speed(int k, double speed) {
  positions(k);
  speed_[static_cast<std::size_t>(k - first_)] = speed;
}

VelocityField FlowHistory::field(int k) const {
  return VelocityField(domain(), delta(), positions(k), circulation_, strategy_);
}

VelocityField FlowHistory::interpolated_field(int k, int dir, double f) const {
  const auto a = positions(k);
  const auto b = positions(k + dir);
  std::vector<Vec2> mix(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) mix[i] = (1.0 - f) * a[i] + f * b[i];
  return VelocityField(domain(), delta(), mix, circulation_, strategy_);
}

FlowHistory forward_flow(const VorticitySpec& spec, const FlowOptions& opt) {
  if (!(opt.T >= 0.0) || !std::isfinite(opt.T)) throw ConfigError(fmt::format("final time T must be >= 0, got {}", opt.T));
  if (!(opt.dt > 0.0)) throw ConfigError(fmt::format("time step must be positive, got {}", opt.dt));
  const double steps_real = opt.T / opt.dt;
  const long steps = std::lround(steps_real);
  if (std::abs(steps * opt.dt - opt.T) > 1e-9 * std::max(1.0, opt.T)) {
    throw ConfigError(fmt::format("time step {} does not divide T = {}", opt.dt, opt.T));
  }
  check_support(spec, opt.domain, opt.h);
  check_resolvable(spec, opt.h);
  ParticleEnsemble init = seed_particles(spec, opt.domain, opt.h, opt.delta);
  if (init.particles.empty()) throw ConfigError("initial vorticity seeds no particles at this h");
  FlowHistory history(init, opt.dt, opt.h, opt.strategy);

  auto speed_at = [&](const ParticleEnsemble& e) {
    const auto p = e.positions();
    return max_norm(eval_velocity(e, p, opt.strategy));
  };
  for (int dir : {+1, -1}) {
    if (dir < 0 && !opt.bidirectional) break;
    ParticleEnsemble ens = history.initial();
    for (long s = 0; s < steps; ++s) {
      double speed = 0.0;
      ens = step_rk4(ens, dir * opt.dt, opt.strategy, &history.containment(), &speed);
      const int k = dir > 0 ? static_cast<int>(s) : -static_cast<int>(s);
      history.set_speed(k, speed);
      if (dir > 0) {
        history.append(ens.positions(), 0.0);
      } else {
        history.prepend(ens.positions(), 0.0);
      }
    }
    const int end = dir > 0 ? history.last_index() : history.first_index();
    if (steps > 0 || dir > 0) history.set_speed(end, speed_at(ens));
  }
  return history;
}

std::vector<Vec2> transport(const FlowHistory& history, std::span<const Vec2> points, double t_from, double t_to) {
  const int k0 = history.index_of(t_from);
  const int k1 = history.index_of(t_to);
  for (const Vec2& p : points) {
    if (!history.domain().contains(p)) {
      throw DomainError(fmt::format("point ({}, {}) lies outside the {}", p.x, p.y, history.domain().name()));
    }
  }
  std::vector<Vec2> y(points.begin(), points.end());
  if (k0 == k1 || y.empty()) return y;
  const int dir = k1 > k0 ? 1 : -1;
  const double h = dir * history.dt();
  const Domain& dom = history.domain();

  VelocityField start = history.field(k0);
  for (int k = k0; k != k1; k += dir) {
    const VelocityField mid = history.interpolated_field(k, dir, 0.5);
    VelocityField end = history.field(k + dir);
    const auto v1 = start.evaluate(y);
    auto y1 = axpy(y, 0.5 * h, v1);
    contain(y1, dom, nullptr);
    const auto v2 = mid.evaluate(y1);
    auto y2 = axpy(y, 0.5 * h, v2);
    contain(y2, dom, nullptr);
    const auto v3 = mid.evaluate(y2);
    auto y3 = axpy(y, h, v3);
    contain(y3, dom, nullptr);
    const auto v4 = end.evaluate(y3);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += (h / 6.0) * (v1[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
    contain(y, dom, nullptr);
    start = std::move(end);
  }
  return y;
}

std::vector<Vec2> backward_flow(const FlowHistory& history, std::span<const Vec2> points, double t) {
  return transport(history, points, t, 0.0);
}

double composition_defect(const FlowHistory& history, double t) {
  const int k = history.index_of(t);
  if (k == 0) return 0.0;
  const auto pos = history.positions(k);
  const auto back = backward_flow(history, pos, t);
  const auto& parts = history.initial().particles;
  double total = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i) total += norm(back[i] - parts[i].label);
  return total / static_cast<double>(back.size());
}

JacobianResult jacobian_determinant(const FlowHistory& history, double t, std::span<const Vec2> probes, double step) {
  if (!(step > 0.0)) throw ConfigError(fmt::format("finite-difference step must be positive, got {}", step));
  JacobianResult res;
  if (history.index_of(t) == 0) {
    // X_{0,0} is the identity.
    res.determinant.assign(probes.size(), 1.0);
    return res;
  }
  res.composition_tolerance = composition_defect(history, t);
  res.step_flagged = step < 10.0 * res.composition_tolerance;
  std::vector<Vec2> pts;
  pts.reserve(4 * probes.size());
  for (const Vec2& p : probes) {
    for (Vec2 d : {Vec2{step, 0.0}, Vec2{-step, 0.0}, Vec2{0.0, step}, Vec2{0.0, -step}}) pts.push_back(p + d);
  }
  const auto img = backward_flow(history, pts, t);
  res.determinant.resize(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Vec2 dx = (img[4 * i] - img[4 * i + 1]) / (2.0 * step);
    const Vec2 dy = (img[4 * i + 2] - img[4 * i + 3]) / (2.0 * step);
    res.determinant[i] = dx.x * dy.y - dx.y * dy.x;
  }
  return res;
}

double eval_solution(const FlowHistory& history, const VorticitySpec& spec, Vec2 x, double t) {
  return eval_solution(history, spec, std::span<const Vec2>(&x, 1), t)[0];
}

std::vector<double> eval_solution(const FlowHistory& history, const VorticitySpec& spec, std::span<const Vec2> points,
                                  double t) {
  const auto back = backward_flow(history, points, t);
  std::vector<double> out(back.size());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = spec(back[i]);
  return out;
}

}  // namespace lagvort
