#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "lagvort/errors.hpp"
#include "lagvort/flow.hpp"
#include "lagvort/random.hpp"
#include "lagvort/summation.hpp"

using namespace lagvort;

namespace {

struct Cloud {
  std::vector<Vec2> pos;
  std::vector<double> gamma;
};

Cloud random_cloud(std::size_t n, double radius, std::uint64_t seed) {
  Rng rng(seed);
  Cloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.pos.push_back(rng.in_disk(radius));
    c.gamma.push_back(rng.uniform(0.5, 1.5) / static_cast<double>(n));
  }
  return c;
}

double max_norm_error(std::span<const Vec2> a, std::span<const Vec2> b) {
  double e = 0.0, m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e = std::max(e, norm(a[i] - b[i]));
    m = std::max(m, norm(b[i]));
  }
  return e / m;
}

}  // namespace

TEST_SUITE("summation") {
  TEST_CASE("single vortex matches the plane kernel") {
    const std::vector<Vec2> p{{0, 0}};
    const std::vector<double> g{1.0};
    const VelocityField u(Domain::plane(), 0.0, p, g, SummationStrategy::direct());
    const Vec2 v = u(Vec2{1, 0});
    CHECK(std::abs(v.x) < 1e-16);
    CHECK(v.y == doctest::Approx(0.5 / std::numbers::pi).epsilon(1e-15));
  }

  TEST_CASE("symmetric vortices cancel at the center") {
    const double a = 0.3;
    const std::vector<Vec2> p{{a, 0}, {-a, 0}, {0, a}, {0, -a}};
    const std::vector<double> g(4, 0.7);
    for (double delta : {0.0, 0.05}) {
      const VelocityField u(Domain::plane(), delta, p, g, SummationStrategy::direct());
      const Vec2 v = u(Vec2{0, 0});
      CHECK(norm(v) < 1e-16);
    }
  }

  TEST_CASE("treecode matches direct summation on 1e4 particles") {
    const Cloud c = random_cloud(10000, 0.9, 17);
    Rng rng(19);
    std::vector<Vec2> targets;
    for (int i = 0; i < 100; ++i) targets.push_back(rng.in_disk(0.95));
    for (const Domain& dom : {Domain::plane(), Domain::disk(1.0)}) {
      for (double delta : {0.0, 0.01}) {
        const VelocityField direct(dom, delta, c.pos, c.gamma, SummationStrategy::direct());
        const VelocityField tree(dom, delta, c.pos, c.gamma, SummationStrategy::treecode(0.5, 8));
        const auto ud = direct.evaluate(targets);
        const auto ut = tree.evaluate(targets);
        CHECK(max_norm_error(ut, ud) <= 1e-4);
      }
    }
  }

  TEST_CASE("treecode error decreases with order") {
    const Cloud c = random_cloud(10000, 0.9, 23);
    Rng rng(29);
    std::vector<Vec2> targets;
    for (int i = 0; i < 200; ++i) targets.push_back(rng.in_disk(0.9));
    const double delta = 0.01;
    const VelocityField direct(Domain::plane(), delta, c.pos, c.gamma, SummationStrategy::direct());
    const auto ud = direct.evaluate(targets);
    double prev = INFINITY;
    for (int order = 2; order <= 10; order += 2) {
      const VelocityField tree(Domain::plane(), delta, c.pos, c.gamma, SummationStrategy::treecode(0.5, order));
      const double err = max_norm_error(tree.evaluate(targets), ud);
      CHECK(err < prev);
      prev = err;
    }
  }

  TEST_CASE("strategy validation and domain errors") {
    CHECK_THROWS(SummationStrategy::treecode(1.0, 8).validate());
    CHECK_THROWS(SummationStrategy::treecode(0.5, 0).validate());
    const std::vector<Vec2> p{{0.1, 0}};
    const std::vector<double> g{1.0};
    const VelocityField u(Domain::disk(1.0), 0.01, p, g, SummationStrategy::direct());
    const std::vector<Vec2> outside{{1.5, 0}};
    CHECK_THROWS_AS(u.evaluate(outside), DomainError);
  }
}
