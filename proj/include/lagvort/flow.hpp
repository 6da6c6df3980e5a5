#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lagvort/kernel.hpp"
#include "lagvort/summation.hpp"
#include "lagvort/vec2.hpp"
#include "lagvort/vorticity.hpp"

namespace lagvort {

struct Particle {
  Vec2 label;      // Lagrangian coordinate, the position at t = 0
  Vec2 position;
  double vorticity = 0.0;
  double weight = 0.0;  // cell area h^2

  double circulation() const { return vorticity * weight; }
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  double time = 0.0;
  Domain domain = Domain::plane();
  KernelSpec kernel{Domain::plane(), 0.0};

  std::size_t size() const { return particles.size(); }
  std::vector<Vec2> positions() const;
  std::vector<double> circulations() const;
  double total_circulation() const;
};

// Cell-centered grid of spacing h over the support box of omega_0; cells with |omega_0| < 1e-14
// are dropped. delta < 0 selects the default 0.8 h.
ParticleEnsemble seed_particles(const VorticitySpec& spec, const Domain& domain, double h, double delta = -1.0);

ParticleEnsemble make_ensemble(const Domain& domain, double delta, std::span<const Vec2> positions,
                               std::span<const double> vorticity, std::span<const double> weights);

std::vector<Vec2> eval_velocity(const ParticleEnsemble& ensemble, std::span<const Vec2> targets,
                                const SummationStrategy& strategy);

// Radial projection of points that stepped outside the disk.
struct ContainmentStats {
  std::size_t projections = 0;
  std::vector<bool> projected;  // per particle, ever projected
};

// Classical RK4 of the particle system. dt < 0 runs the time-reversed system. After every stage,
// disk positions beyond R are pulled back to R (1 - 1e-12); a position further out than
// R (1 + 1e-6), or a non-finite one, raises BlowUpError.
ParticleEnsemble step_rk4(const ParticleEnsemble& ensemble, double dt, const SummationStrategy& strategy,
                          ContainmentStats* stats = nullptr, double* max_speed = nullptr);

// RK4 snapshots at t_k = k dt for k in [first_index, last_index]. Labels, vorticity and weights
// are stored once; each snapshot keeps positions only.
class FlowHistory {
 public:
  FlowHistory(ParticleEnsemble initial, double dt, double h, SummationStrategy strategy);

  double dt() const { return dt_; }
  double h() const { return h_; }
  double delta() const { return base_.kernel.delta; }
  const Domain& domain() const { return base_.domain; }
  const SummationStrategy& strategy() const { return strategy_; }
  std::size_t particle_count() const { return base_.size(); }

  int first_index() const { return first_; }
  int last_index() const { return first_ + static_cast<int>(positions_.size()) - 1; }
  std::size_t snapshot_count() const { return positions_.size(); }
  double time(int k) const { return k * dt_; }
  double t_min() const { return time(first_index()); }
  double t_max() const { return time(last_index()); }
  // Index of snapshot time t; HistoryError if t is not one (to 1e-9 dt).
  int index_of(double t) const;
  bool has_time(double t) const;

  std::span<const Vec2> positions(int k) const;
  ParticleEnsemble snapshot(int k) const;
  const ParticleEnsemble& initial() const { return base_; }
  // Max particle speed at snapshot k.
  double max_speed(int k) const;
  double max_speed() const;

  std::size_t projections() const { return containment_.projections; }
  std::size_t projected_particles() const;
  // Invalid when more than 0.1% of particles were ever projected back into the disk.
  bool valid() const;

  void append(std::vector<Vec2> positions, double speed);
  void prepend(std::vector<Vec2> positions, double speed);
  void set_speed(int k, double speed);
  ContainmentStats& containment() { return containment_; }

  // A field over snapshot k, built once per request.
  VelocityField field(int k) const;
  // Field of the ensemble whose positions interpolate snapshots k and k + dir at fraction f.
  VelocityField interpolated_field(int k, int dir, double f) const;

 private:
  ParticleEnsemble base_;
  double dt_;
  double h_;
  SummationStrategy strategy_;
  int first_ = 0;
  std::vector<std::vector<Vec2>> positions_;
  std::vector<double> speed_;
  ContainmentStats containment_;
  std::vector<double> circulation_;
};

struct FlowOptions {
  Domain domain = Domain::disk(1.0);
  double T = 1.0;
  double dt = 0.01;
  double h = 1.0 / 64.0;
  double delta = -1.0;  // < 0: 0.8 h
  SummationStrategy strategy = SummationStrategy::direct();
  // Also integrate the reversed system down to -T.
  bool bidirectional = false;
};

// Snapshots at every step on [0, T] (and [-T, 0] when bidirectional). Checks the support, that dt
// divides T and that oscillations are resolvable.
FlowHistory forward_flow(const VorticitySpec& spec, const FlowOptions& options);

// Carries points along the history's velocity from snapshot time t_from to t_to by RK4 with step
// +-dt; the stage velocity comes from the ensemble interpolated linearly between snapshots.
std::vector<Vec2> transport(const FlowHistory& history, std::span<const Vec2> points, double t_from, double t_to);

// X_{t,0}(points).
std::vector<Vec2> backward_flow(const FlowHistory& history, std::span<const Vec2> points, double t);

// Mean |X_{t,0}(X_{0,t}(label)) - label| over the particles.
double composition_defect(const FlowHistory& history, double t);

struct JacobianResult {
  std::vector<double> determinant;
  double composition_tolerance = 0.0;
  // Finite-difference step below 10x the composition tolerance.
  bool step_flagged = false;
};

// Central-difference det grad X_{t,0} at each probe.
JacobianResult jacobian_determinant(const FlowHistory& history, double t, std::span<const Vec2> probes, double step);

}  // namespace lagvort
