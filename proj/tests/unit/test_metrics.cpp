#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "lagvort/errors.hpp"
#include "lagvort/flow.hpp"
#include "lagvort/history_io.hpp"
#include "lagvort/kernel.hpp"
#include "lagvort/metrics.hpp"

using namespace lagvort;

namespace {

constexpr double kPi = std::numbers::pi;

FlowOptions disk_options(double T, double dt, double h) {
  FlowOptions o;
  o.domain = Domain::disk(1.0);
  o.T = T;
  o.dt = dt;
  o.h = h;
  return o;
}

double lens_area(double r, double d) {
  if (d >= 2 * r) return 0.0;
  return 2 * r * r * std::acos(d / (2 * r)) - 0.5 * d * std::sqrt(4 * r * r - d * d);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("quadrature lattice") {
    const auto g = QuadratureGrid::lattice({{-1, -1}, {1, 1}}, 0.1, Domain::disk(1.0));
    for (Vec2 p : g.points) CHECK(norm(p) <= 1.0);
    CHECK(g.size() * g.cell_area() == doctest::Approx(kPi).epsilon(0.02));
    // Shared nodes: a sub-box selects a subset of the same lattice.
    const auto sub = QuadratureGrid::lattice({{0.0, 0.0}, {0.5, 0.5}}, 0.1, Domain::plane());
    REQUIRE(sub.size() == 25);
    CHECK(sub.points.front().x == doctest::Approx(0.05).epsilon(1e-12));
  }

  TEST_CASE("symmetric difference of two disks") {
    CHECK(disk_symmetric_difference(0.3, 0.0) == 0.0);
    CHECK(disk_symmetric_difference(0.3, 0.7) == doctest::Approx(2 * kPi * 0.09).epsilon(1e-14));
    for (double d : {0.001, 0.05, 0.2, 0.59}) {
      CHECK(disk_symmetric_difference(0.3, d) == doctest::Approx(2 * (kPi * 0.09 - lens_area(0.3, d))).epsilon(1e-10));
    }
  }

  TEST_CASE("L1 distance of offset patches matches the lens area") {
    const double r = 0.3, A = 1.0, d = 0.05;
    const auto w1 = VorticitySpec::patch({0.2, 0.0}, r, A);
    const auto w2 = VorticitySpec::patch({0.2 + d, 0.0}, r, A);
    const double h = 0.6 / 32;
    const auto h1 = forward_flow(w1, disk_options(0.0, 0.02, h));
    const auto h2 = forward_flow(w2, disk_options(0.0, 0.02, h));
    const Solution s1{&h1, w1}, s2{&h2, w2};
    const double expected = A * 2 * (kPi * r * r - lens_area(r, d));
    CHECK(std::abs(lp_distance(s1, s2, 1.0, 0.0, h / 4) - expected) <= 0.02 * expected);
    CHECK(lp_distance(s1, s1, 1.0, 0.0, h / 2) == 0.0);
    CHECK(lp_distance(s1, s2, 2.0, 0.0, h / 2) == doctest::Approx(lp_distance(s2, s1, 2.0, 0.0, h / 2)).epsilon(1e-14));
  }

  TEST_CASE("Lp distance is a metric along the flow") {
    const double h = 0.6 / 24;
    const auto w1 = VorticitySpec::patch({0.2, 0.0}, 0.3, 1.0);
    const auto w2 = VorticitySpec::patch({0.25, 0.0}, 0.3, 1.0);
    const auto w3 = VorticitySpec::patch({0.2, 0.06}, 0.28, 1.0);
    const auto h1 = forward_flow(w1, disk_options(0.2, 0.02, h));
    const auto h2 = forward_flow(w2, disk_options(0.2, 0.02, h));
    const auto h3 = forward_flow(w3, disk_options(0.2, 0.02, h));
    const Solution a{&h1, w1}, b{&h2, w2}, c{&h3, w3};
    for (double p : {1.0, 2.0}) {
      const double ab = lp_distance(a, b, p, 0.2, h / 2);
      const double bc = lp_distance(b, c, p, 0.2, h / 2);
      const double ac = lp_distance(a, c, p, 0.2, h / 2);
      CHECK(lp_distance(a, a, p, 0.2, h / 2) == 0.0);
      CHECK(ab == doctest::Approx(lp_distance(b, a, p, 0.2, h / 2)).epsilon(1e-14));
      CHECK(ac <= ab + bc + 1e-14);
    }
  }

  TEST_CASE("transported vorticity is a rearrangement") {
    const double h = 0.6 / 32;
    const auto w = VorticitySpec::patch({0.35, 0.1}, 0.3, 1.0);
    const auto hist = forward_flow(w, disk_options(1.0, 0.02, h));
    const Solution s{&hist, w};
    const double area = kPi * 0.09;
    for (double p : {1.0, 2.0}) {
      const double n0 = std::pow(area, 1.0 / p);
      CHECK(std::abs(lp_norm(s, p, 0.0, h / 2) - n0) <= 0.01 * n0);
      CHECK(std::abs(lp_norm(s, p, 1.0, h / 2) - n0) <= 0.01 * n0);
    }
    const ScalarField one = [](Vec2) { return 1.0; };
    const double c0 = weak_pairing(s, one, 0.0, h / 2);
    CHECK(std::abs(weak_pairing(s, one, 1.0, h / 2) - c0) <= 0.01 * c0);
  }

  TEST_CASE("incompatible histories are rejected") {
    const auto w = VorticitySpec::patch({0.2, 0.0}, 0.3, 1.0);
    const auto h1 = forward_flow(w, disk_options(0.0, 0.02, 0.04));
    const auto h2 = forward_flow(w, disk_options(0.0, 0.02, 0.05));
    CHECK_THROWS_AS(lp_distance({&h1, w}, {&h2, w}, 1.0, 0.0, 0.01), HistoryError);
    CHECK_THROWS_AS(lp_norm({&h1, w}, 1.0, 0.5, 0.01), HistoryError);
  }

  TEST_CASE("stability bounds") {
    const StabilityBound b{1.0, 1.0, 1.0, 1e-3};
    const auto r0 = osgood_eta_bound(b, 0.0);
    CHECK(r0.value == doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(r0.applicable);
    const double a1 = std::exp(-1.0);
    const auto r1 = osgood_eta_bound(b, 1.0);
    CHECK(r1.value == doctest::Approx(std::exp(1 - a1) * std::pow(1e-3, a1)).epsilon(1e-14));
    CHECK(osgood_eta_bound(b, -1.0).value == r1.value);
    double prev = 0.0;
    for (double r = 0.0; r <= 1.0; r += 0.1) {
      const double v = osgood_eta_bound(b, r).value;
      CHECK(v >= prev);
      prev = v;
    }
    // Smallness fails when CTz is not below e^{1 - exp(CTM)}.
    CHECK_FALSE(osgood_eta_bound({1.0, 1.0, 1.0, 0.5}, 0.5).applicable);

    const double phi = phi_T_M(b);
    const double arg = std::exp(1.0) * std::pow(1e-3, std::exp(-1.0));
    CHECK(phi == doctest::Approx(1e-3 + modulus_phi(arg)).epsilon(1e-14));
    const auto two = eta_two_time_bound(b, 0.5, 0.5);
    CHECK(two.value == doctest::Approx(phi).epsilon(1e-14));
    CHECK(two.applicable == (phi < std::exp(1 - std::exp(2.0))));
    const auto tiny = eta_two_time_bound({1.0, 0.5, 0.1, 1e-8}, 0.5, -0.5);
    const double at = std::exp(-0.1);
    CHECK(tiny.value == doctest::Approx(std::exp(1 - at) * std::pow(phi_T_M({1.0, 0.5, 0.1, 1e-8}), at)).epsilon(1e-14));
    CHECK(tiny.applicable);
    CHECK(phi_T_M({1.0, 1.0, 1.0, 2e-3}) > phi);
  }

  TEST_CASE("eta vanishes on identical flows and on the diagonal") {
    const double h = 0.6 / 16;
    const auto w1 = VorticitySpec::patch({0.2, 0.0}, 0.3, 1.0);
    const auto w2 = VorticitySpec::patch({0.25, 0.0}, 0.3, 1.0);
    FlowOptions o = disk_options(0.2, 0.05, h);
    o.bidirectional = true;
    const auto h1 = forward_flow(w1, o);
    const auto h2 = forward_flow(w2, o);
    const auto tracers = eta_tracers(Domain::disk(1.0), w1, w2, 0.1);
    double wsum = 0.0;
    for (double x : tracers.weights) wsum += x;
    CHECK(wsum / tracers.normalization == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eta(h1, h1, 0.2, -0.2, tracers) == 0.0);
    CHECK(eta(h1, h2, 0.1, 0.1, tracers) == 0.0);
    const double e = eta(h1, h2, 0.0, 0.2, tracers);
    CHECK(e > 0.0);
    const std::vector<double> times{-0.2, 0.0, 0.2};
    const auto table = eta_table(h1, h2, times, tracers);
    REQUIRE(table.size() == 3);
    CHECK(table[1][2] == e);
    for (int i = 0; i < 3; ++i) CHECK(table[i][i] == 0.0);
  }

  TEST_CASE("holder exponent") {
    const double h = 0.6 / 24;
    const auto w = VorticitySpec::patch({0.0, 0.0}, 0.3, 1.0);
    const auto hist = forward_flow(w, disk_options(0.5, 0.05, h));
    const auto f0 = holder_exponent(hist, 0.0, 500, h, 16 * h);
    CHECK(f0.alpha == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f0.octaves == doctest::Approx(4.0));
    const auto f1 = holder_exponent(hist, 0.5, 500, h, 16 * h);
    CHECK(std::abs(f1.alpha - 1.0) <= 0.02);
    CHECK_THROWS_AS(holder_exponent(hist, 0.5, 500, h / 2, 16 * h), ResolutionError);
    CHECK_THROWS_AS(holder_exponent(hist, 0.5, 500, h, 4 * h), ResolutionError);
  }

  TEST_CASE("log-Lipschitz estimate is finite") {
    const double h = 0.6 / 24;
    const auto w = VorticitySpec::patch({0.3, 0.0}, 0.3, 1.0);
    const auto hist = forward_flow(w, disk_options(0.0, 0.05, h));
    const auto est = log_lipschitz_ratio({&hist, w}, 0.0, 2000, h, 0.5);
    CHECK(est.pairs == 2000);
    CHECK(std::isfinite(est.max_ratio));
    CHECK(est.max_ratio > 0.0);
    // Plane part peaks at M r / 2 on the patch edge; the images sit at least 0.67 away.
    CHECK(est.max_speed_ratio <= 2 * 0.3);
  }

  TEST_CASE("weak form residual") {
    const double h = 0.6 / 24;
    const auto w = VorticitySpec::patch({0.0, 0.0}, 0.3, 1.0);
    const auto hist = forward_flow(w, disk_options(0.5, 0.05, h));
    const Solution s{&hist, w};
    const TestFunction constant{[](Vec2, double) { return 1.0; }, [](Vec2, double) { return Vec2{}; },
                                [](Vec2, double) { return 0.0; }};
    CHECK(weakform_residual(s, constant, 0.0, 0.5, h / 2) <= 1e-3 * kPi * 0.09);
    // A radial test function sees no transport across circles.
    const auto radial = gaussian_test_function({0.0, 0.0}, 0.2);
    CHECK(weakform_residual(s, radial, 0.0, 0.5, h / 2) <= 1e-3);
    const auto off = gaussian_test_function({0.2, 0.1}, 0.15);
    CHECK(weakform_residual(s, off, 0.0, 0.5, h / 2, 2) <= 1e-2);
    CHECK(off.value({0.2, 0.1}, 0.3) == 1.0);
    CHECK(off.time_derivative({0.0, 0.0}, 0.3) == 0.0);
  }

  TEST_CASE("history export") {
    const auto w = VorticitySpec::patch({0.2, 0.0}, 0.2, 1.0);
    const auto hist = forward_flow(w, disk_options(0.1, 0.05, 0.05));
    const auto dir = std::filesystem::temp_directory_path() / "lagvort_unit_export";
    std::filesystem::remove_all(dir);
    export_history(hist, dir);
    std::ifstream mf(dir / "manifest.json");
    const auto m = nlohmann::json::parse(mf);
    CHECK(m["dt"].get<double>() == 0.05);
    CHECK(m["h"].get<double>() == 0.05);
    CHECK(m["delta"].get<double>() == doctest::Approx(0.04));
    CHECK(m["domain"]["kind"] == "disk");
    REQUIRE(m["snapshots"].size() == 3);
    std::ifstream f(dir / m["snapshots"][2]["file"].get<std::string>());
    std::string header, row;
    std::getline(f, header);
    CHECK(header == "t,label_x,label_y,pos_x,pos_y,vorticity,weight");
    std::size_t rows = 0;
    std::getline(f, row);
    ++rows;
    std::vector<double> v;
    std::stringstream ss(row);
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 7);
    CHECK(v[0] == doctest::Approx(0.1));
    CHECK(v[3] == hist.positions(2)[0].x);
    CHECK(v[4] == hist.positions(2)[0].y);
    while (std::getline(f, row)) ++rows;
    CHECK(rows == hist.particle_count());
    std::filesystem::remove_all(dir);
  }
}
