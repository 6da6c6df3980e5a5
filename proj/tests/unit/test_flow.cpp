#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "lagvort/errors.hpp"
#include "lagvort/flow.hpp"
#include "lagvort/random.hpp"
#include "lagvort/vorticity.hpp"

using namespace lagvort;

namespace {

constexpr double kPi = std::numbers::pi;

FlowOptions coarse_disk(double T, double dt, double h) {
  FlowOptions o;
  o.domain = Domain::disk(1.0);
  o.T = T;
  o.dt = dt;
  o.h = h;
  return o;
}

// Smooth radial data; a sharp indicator seeded on a square grid has an O(h) staircase edge.
VorticitySpec radial_patch() { return VorticitySpec::mollified(DiskPatch{{0.0, 0.0}, 0.3, 1.0}, 0.1); }

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("zero-vorticity particles do not move") {
    const std::vector<Vec2> p{{0.1, 0.2}, {-0.3, 0.4}, {0.5, -0.5}};
    const std::vector<double> w(3, 0.0), a(3, 1e-4);
    const auto ens = make_ensemble(Domain::disk(1.0), 0.01, p, w, a);
    const auto next = step_rk4(ens, 0.1, SummationStrategy::direct());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(next.particles[i].position == p[i]);
    CHECK(next.time == doctest::Approx(0.1));
  }

  TEST_CASE("a lone vortex at the disk center is stationary") {
    const std::vector<Vec2> p{{0.0, 0.0}};
    const std::vector<double> w{1.0}, a{1.0};
    auto ens = make_ensemble(Domain::disk(1.0), 0.0, p, w, a);
    for (int k = 0; k < 10; ++k) ens = step_rk4(ens, 0.1, SummationStrategy::direct());
    CHECK(ens.particles[0].position == Vec2{0.0, 0.0});
  }

  TEST_CASE("two point vortices co-rotate with the known period") {
    const double d = 1.0, gamma = 1.0;
    const double period = 2 * kPi * kPi * d * d / gamma;
    const std::vector<Vec2> p{{-d / 2, 0.0}, {d / 2, 0.0}};
    const std::vector<double> w{gamma, gamma}, a{1.0, 1.0};
    auto ens = make_ensemble(Domain::plane(), 0.0, p, w, a);
    const double dt = period / 1000;
    for (int k = 0; k < 250; ++k) ens = step_rk4(ens, dt, SummationStrategy::direct());
    // Quarter turn, counter-clockwise.
    CHECK(norm(ens.particles[0].position - Vec2{0.0, -d / 2}) <= 1e-4 * d);
    for (int k = 250; k < 1000; ++k) ens = step_rk4(ens, dt, SummationStrategy::direct());
    CHECK(norm(ens.particles[0].position - p[0]) <= 1e-4 * d);
    CHECK(norm(ens.particles[1].position - p[1]) <= 1e-4 * d);
  }

  TEST_CASE("T = 0 gives a single snapshot") {
    const auto w = VorticitySpec::patch({0.2, 0.0}, 0.2, 1.0);
    const auto hist = forward_flow(w, coarse_disk(0.0, 0.01, 0.04));
    CHECK(hist.snapshot_count() == 1);
    CHECK(hist.t_max() == 0.0);
    CHECK_THROWS_AS(hist.index_of(0.01), HistoryError);
  }

  TEST_CASE("flow option validation") {
    const auto w = VorticitySpec::patch({0.2, 0.0}, 0.2, 1.0);
    CHECK_THROWS_AS(forward_flow(w, coarse_disk(1.0, 0.3, 0.04)), ConfigError);
    CHECK_THROWS_AS(forward_flow(w, coarse_disk(1.0, -0.1, 0.04)), ConfigError);
    CHECK_THROWS_AS(forward_flow(VorticitySpec::patch({0.8, 0.0}, 0.3, 1.0), coarse_disk(1.0, 0.1, 0.04)), DomainError);
    CHECK_THROWS_AS(forward_flow(VorticitySpec::oscillatory(w, 0.5, 32), coarse_disk(1.0, 0.1, 0.04)), ResolutionError);
  }

  TEST_CASE("centered radial patch is a steady state") {
    const auto w = radial_patch();
    const auto hist = forward_flow(w, coarse_disk(1.0, 0.05, 0.02));
    const auto& init = hist.initial();
    const auto last = hist.positions(hist.last_index());
    double drift = 0.0;
    for (std::size_t i = 0; i < last.size(); ++i) {
      drift = std::max(drift, std::abs(norm(last[i]) - norm(init.particles[i].position)));
    }
    CHECK(drift <= 1e-4);
    CHECK(std::abs(hist.snapshot(hist.last_index()).total_circulation() - init.total_circulation()) <= 1e-6);
    CHECK(hist.valid());
  }

  TEST_CASE("backward flow") {
    const auto w = radial_patch();
    const auto hist = forward_flow(w, coarse_disk(0.5, 0.05, 0.03));
    Rng rng(9);
    std::vector<Vec2> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(rng.in_disk(0.9));
    const auto same = backward_flow(hist, pts, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(same[i] == pts[i]);
    const auto back = backward_flow(hist, pts, 0.5);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(norm(back[i]) - norm(pts[i])) <= 1e-4);
    const std::vector<Vec2> outside{{1.2, 0.0}};
    CHECK_THROWS_AS(backward_flow(hist, outside, 0.5), DomainError);
    CHECK_THROWS_AS(backward_flow(hist, pts, 0.52), HistoryError);
  }

  TEST_CASE("composition defect shrinks under step refinement") {
    const auto w = VorticitySpec::patch({0.3, 0.1}, 0.25, 1.0);
    const auto coarse = forward_flow(w, coarse_disk(1.0, 0.1, 0.04));
    const auto fine = forward_flow(w, coarse_disk(1.0, 0.05, 0.04));
    const double dc = composition_defect(coarse, 1.0);
    const double df = composition_defect(fine, 1.0);
    CHECK(composition_defect(coarse, 0.0) == 0.0);
    CHECK(df < dc);
  }

  TEST_CASE("jacobian determinant") {
    const auto w = radial_patch();
    const auto hist = forward_flow(w, coarse_disk(0.5, 0.05, 0.03));
    const std::vector<Vec2> probes{{0.1, 0.0}, {0.0, 0.25}, {-0.5, 0.2}, {0.3, -0.3}};
    const auto j0 = jacobian_determinant(hist, 0.0, probes, 1e-3);
    for (double d : j0.determinant) CHECK(d == 1.0);
    const auto j1 = jacobian_determinant(hist, 0.5, probes, 1e-3);
    for (double d : j1.determinant) CHECK(std::abs(d - 1.0) <= 1e-3);
    CHECK_THROWS_AS(jacobian_determinant(hist, 0.5, probes, 0.0), ConfigError);
  }

  TEST_CASE("leaving the disk raises BlowUpError") {
    // A strong vortex next to a near-boundary particle: one half stage along the tangent
    // overshoots R (1 + 1e-6).
    const std::vector<Vec2> p{{0.0, 0.99}, {0.0, 0.999}};
    const std::vector<double> w{1.0, 0.0}, a{1.0, 1.0};
    const auto ens = make_ensemble(Domain::disk(1.0), 1e-3, p, w, a);
    CHECK_THROWS_AS(step_rk4(ens, 0.01, SummationStrategy::direct()), BlowUpError);
    const std::vector<Vec2> out{{1.01, 0.0}};
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(make_ensemble(Domain::disk(1.0), 0.01, out, one, one), DomainError);
    CHECK_THROWS_AS(eval_velocity(ens, out, SummationStrategy::direct()), DomainError);
  }

  TEST_CASE("solution values stay in the initial range") {
    const auto base = VorticitySpec::patch({0.2, 0.0}, 0.3, 1.0);
    const auto w = VorticitySpec::oscillatory(base, 0.5, 4);
    const auto hist = forward_flow(w, coarse_disk(0.5, 0.05, 0.03));
    Rng rng(13);
    std::vector<Vec2> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(rng.in_disk(0.95));
    const auto vals = eval_solution(hist, w, pts, 0.5);
    const auto [lo, hi] = w.value_range();
    for (double v : vals) {
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
    CHECK(eval_solution(hist, w, Vec2{0.2, 0.0}, 0.0) == w({0.2, 0.0}));
  }
}
