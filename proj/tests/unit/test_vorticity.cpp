#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "lagvort/errors.hpp"
#include "lagvort/kernel.hpp"
#include "lagvort/vorticity.hpp"

using namespace lagvort;

namespace {

constexpr double kPi = std::numbers::pi;

// Midpoint rule over a box with n x n cells.
template <class F>
double integrate_box(const Box& b, int n, F&& f) {
  const double dx = b.width() / n, dy = b.height() / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) acc += f(Vec2{b.lo.x + (i + 0.5) * dx, b.lo.y + (j + 0.5) * dy});
  }
  return acc * dx * dy;
}

}  // namespace

TEST_SUITE("vorticity") {
  TEST_CASE("patch evaluation") {
    const auto w = VorticitySpec::patch({0.1, 0.0}, 0.3, 2.0);
    CHECK(w({0.1, 0.0}) == 2.0);
    CHECK(w({0.39, 0.0}) == 2.0);
    CHECK(w({0.41, 0.0}) == 0.0);
    CHECK(w.sup_norm() == 2.0);
    CHECK(w.value_range() == std::pair{0.0, 2.0});
    CHECK(eval_initial(w, {0.0, 0.1}) == 2.0);
    CHECK_THROWS_AS(VorticitySpec::patch({0, 0}, -0.1, 1.0), ConfigError);
  }

  TEST_CASE("oscillatory evaluation") {
    const auto base = VorticitySpec::patch({0.0, 0.0}, 0.5, 1.0);
    const auto w = VorticitySpec::oscillatory(base, 1.0, 4, 0);
    CHECK(w({kPi / 8, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w({-kPi / 8, 0.0}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(w({0.6, 0.0}) == 0.0);
    const auto wy = VorticitySpec::oscillatory(base, 0.5, 4, 1);
    CHECK(wy({0.0, kPi / 8}) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(w.sup_norm() == doctest::Approx(2.0));
    CHECK_THROWS_AS(VorticitySpec::oscillatory(base, 1.0, 4, 2), ConfigError);
    CHECK_THROWS_AS(w.translated({0.1, 0.0}), ConfigError);
  }

  TEST_CASE("sum and translation") {
    const auto a = VorticitySpec::patch({-0.3, 0.0}, 0.2, 1.0);
    const auto b = VorticitySpec::patch({0.3, 0.0}, 0.2, -0.5);
    const auto s = VorticitySpec::sum({a, b});
    CHECK(s({-0.3, 0.0}) == 1.0);
    CHECK(s({0.3, 0.0}) == -0.5);
    CHECK(s({0.0, 0.0}) == 0.0);
    CHECK(s.support_disks().size() == 2);
    const auto t = s.translated({0.0, 0.1});
    CHECK(t({0.3, 0.1}) == -0.5);
    CHECK(t({0.3, -0.15}) == 0.0);
  }

  TEST_CASE("mollifier has unit mass") {
    const Mollifier rho(0.05);
    CHECK(rho.grid_mass(64) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rho({0.05, 0.0}) == 0.0);
    CHECK(rho({0.0, 0.0}) > 0.0);
    CHECK_THROWS_AS(Mollifier(0.0), ConfigError);
  }

  TEST_CASE("mollified patch") {
    const double A = 1.5, r = 0.3, eps = 0.02;
    const auto w = VorticitySpec::patch({0.0, 0.0}, r, A);
    CHECK(mollify(w, eps, {0.1, 0.05}, 32) == doctest::Approx(A).epsilon(1e-14));
    CHECK(mollify(w, eps, {r + 1.01 * eps, 0.0}, 32) == 0.0);
    CHECK(std::abs(mollify(w, eps, {0.0, r}, 64) - A / 2) <= 0.02 * A / 2);
    CHECK_THROWS_AS(mollify(w, eps, {0.0, 0.0}, 7), ResolutionError);

    const auto m = VorticitySpec::mollified(DiskPatch{{0.0, 0.0}, r, A}, eps);
    for (double x : {0.27, 0.29, 0.3, 0.31, 0.315}) {
      CHECK(m({x, 0.0}) == doctest::Approx(mollify(w, eps, {x, 0.0}, 64)).epsilon(1e-3));
    }
    const auto [lo, hi] = m.value_range();
    CHECK(lo == 0.0);
    CHECK(hi == A);
  }

  TEST_CASE("mollification converges in L1 as eps decreases") {
    const auto w = VorticitySpec::patch({0.0, 0.0}, 0.3, 1.0);
    const Box box{{-0.4, -0.4}, {0.4, 0.4}};
    std::vector<double> d;
    for (double eps : {0.08, 0.04, 0.02}) {
      const auto m = VorticitySpec::mollified(DiskPatch{{0.0, 0.0}, 0.3, 1.0}, eps);
      d.push_back(integrate_box(box, 400, [&](Vec2 x) { return std::abs(m(x) - w(x)); }));
    }
    // Only a strip of width eps along the edge differs, so the error is linear in eps.
    CHECK(d[1] < d[0]);
    CHECK(d[2] < d[1]);
    CHECK(d[2] / d[1] == doctest::Approx(0.5).epsilon(0.1));
  }

  TEST_CASE("weak-star family") {
    const auto base = VorticitySpec::patch({0.1, 0.0}, 0.4, 1.0);
    const std::vector<int> freqs{4, 8, 16, 32};
    const auto zero = make_weak_star_family(base, 0.0, freqs);
    REQUIRE(zero.size() == 4);
    for (const auto& z : zero) CHECK(z({0.2, 0.1}) == base({0.2, 0.1}));

    const double A = 0.5;
    const auto fam = make_weak_star_family(base, A, freqs);
    const Box box = base.support_box();
    for (std::size_t i = 0; i < fam.size(); ++i) {
      CHECK(fam[i].sup_norm() <= 1.0 + A);
      // Against f = 1 the gap is bounded by A |supp|.
      const double gap = integrate_box(box, 800, [&](Vec2 x) { return fam[i](x) - base(x); });
      CHECK(std::abs(gap) <= A * kPi * 0.16);
    }
    // Gaussian test function well inside the support: the gap is the whole-plane integral
    // A sin(n c) 2 pi w^2 exp(-n^2 w^2 / 2) up to the truncated tail.
    const double w = 0.1, c = 0.2;
    auto phi = [&](Vec2 x) { return std::exp(-norm2(x - Vec2{c, 0.05}) / (2 * w * w)); };
    std::vector<double> gaps;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      const double n = freqs[i];
      const double gap = integrate_box(box, 1600, [&](Vec2 x) { return (fam[i](x) - base(x)) * phi(x); });
      const double closed = A * std::sin(n * c) * 2 * kPi * w * w * std::exp(-n * n * w * w / 2);
      CHECK(std::abs(gap - closed) <= 1e-3 * A);
      gaps.push_back(std::abs(gap));
    }
    CHECK(gaps.back() < 0.05 * std::max(gaps[0], gaps[1]));
    const std::vector<int> bad{8, 4};
    CHECK_THROWS_AS(make_weak_star_family(base, A, bad), ConfigError);
  }

  TEST_CASE("json roundtrip") {
    const auto base = VorticitySpec::patch({0.1, -0.2}, 0.25, 0.75);
    const auto specs = {base, VorticitySpec::mollified(DiskPatch{{0.0, 0.1}, 0.2, 1.0}, 0.03),
                        VorticitySpec::oscillatory(base, 0.5, 8, 1),
                        VorticitySpec::sum({base, VorticitySpec::patch({-0.4, 0.0}, 0.1, -1.0)})};
    for (const auto& s : specs) {
      const auto back = VorticitySpec::from_json(s.to_json());
      CHECK(back.kind() == s.kind());
      CHECK(back.to_json() == s.to_json());
      for (Vec2 x : {Vec2{0.1, -0.2}, Vec2{0.3, 0.0}, Vec2{-0.4, 0.05}, Vec2{0.0, 0.1}}) CHECK(back(x) == s(x));
    }
    CHECK_THROWS_AS(VorticitySpec::from_json(nlohmann::json{{"kind", "vortex_sheet"}}), ConfigError);
    CHECK_THROWS_AS(VorticitySpec::from_json(nlohmann::json{{"kind", "disk_patch"}, {"radius", 0.1}}), ConfigError);
    CHECK_THROWS_AS(VorticitySpec::from_json(nlohmann::json::parse(R"({"kind": "disk_patch", "center": [0, 0], "radius": "big", "amplitude": 1})")),
                    ConfigError);
  }

  TEST_CASE("support and resolution checks") {
    const auto inside = VorticitySpec::patch({0.35, 0.1}, 0.3, 1.0);
    CHECK_NOTHROW(check_support(inside, Domain::disk(1.0), 0.01));
    CHECK_THROWS_AS(check_support(VorticitySpec::patch({0.8, 0.0}, 0.3, 1.0), Domain::disk(1.0), 0.01), DomainError);
    CHECK_NOTHROW(check_support(VorticitySpec::patch({0.8, 0.0}, 0.3, 1.0), Domain::plane(), 0.01));
    const auto m = VorticitySpec::mollified(DiskPatch{{0.0, 0.0}, 0.9, 1.0}, 0.05);
    CHECK_THROWS_AS(check_support(m, Domain::disk(1.0), 0.06), DomainError);
    CHECK_NOTHROW(check_support(m, Domain::disk(1.0), 0.04));

    const auto osc = VorticitySpec::oscillatory(inside, 0.5, 32, 0);
    CHECK_NOTHROW(check_resolvable(osc, 1.0 / 128));
    CHECK_THROWS_AS(check_resolvable(osc, 1.0 / 64), ResolutionError);
    CHECK_NOTHROW(check_resolvable(VorticitySpec::oscillatory(inside, 0.0, 32, 0), 1.0 / 64));
  }

  TEST_CASE("holder seminorm of a mollified patch") {
    const auto w = VorticitySpec::patch({0.0, 0.0}, 0.3, 1.0);
    const double s1 = holder_seminorm(w, 0.05, 1.0, 2000, 1e-4, 16);
    CHECK(std::isfinite(s1));
    CHECK(s1 > 0.0);
    // The gradient of a mollified indicator is O(A / eps).
    CHECK(s1 < 10.0 / 0.05);
  }
}
