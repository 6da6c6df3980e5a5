#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "lagvort/errors.hpp"
#include "lagvort/harness.hpp"

using namespace lagvort;

namespace {

// Coarse numerics shared by the harness examples.
Config small(const std::string& experiment) {
  Config c;
  c.set("experiment", experiment);
  c.set("numerics.h", "0.0375");
  c.set("numerics.dt", "0.05");
  c.set("numerics.T", "0.2");
  c.set("vorticity.base", R"({"kind": "disk_patch", "center": [0.3, 0.1], "radius": 0.3, "amplitude": 1})");
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("experiment names") {
    for (const char* n : {"simulate", "kernel", "stability", "lp", "weakstar", "time", "weakform", "holder", "refine"}) {
      CHECK(experiment_name(experiment_kind(n)) == n);
    }
    CHECK_THROWS_AS(experiment_kind("bogus"), ConfigError);
  }

  TEST_CASE("typed config validation") {
    Config c = small("simulate");
    const ExperimentConfig ec(c);
    CHECK(ec.flow.h == 0.0375);
    CHECK(ec.spacing() == doctest::Approx(0.01875));
    CHECK(ec.test_functions.size() == 3);
    c.set("numerics.strategy", "fmm");
    CHECK_THROWS_AS(ExperimentConfig{c}, ConfigError);
    Config w = small("weakstar");
    w.set("family.frequencies", "4,8,16");
    CHECK_THROWS_AS(ExperimentConfig{w}, ResolutionError);
  }

  TEST_CASE("simulate with T = 0") {
    Config c = small("simulate");
    c.set("numerics.T", "0");
    const auto dir = std::filesystem::temp_directory_path() / "lagvort_unit_sim";
    std::filesystem::remove_all(dir);
    const Report r = run_experiment(ExperimentConfig(c), dir);
    CHECK(r.exit_status() == 0);
    CHECK(r.flag("circulation_conserved").pass);
    CHECK(r.table("invariants").rows.size() == 1);
    CHECK(std::filesystem::exists(dir / "history" / "manifest.json"));
    write_report(r, dir);
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "resolved.cfg"));
    CHECK(Config::load(dir / "summary.json").raw("numerics.T") == "0");
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("stability of identical data") {
    Config c = small("stability");
    c.set("stability.offset", "0");
    c.set("stability.times", "-0.2,0,0.2");
    c.set("stability.eta_spacing", "0.1");
    c.set("stability.lp", "false");
    const Report r = run_stability(ExperimentConfig(c));
    for (const auto& row : r.table("eta").rows) CHECK(row[2] == 0.0);
    CHECK(r.flag("eta_diagonal_zero").pass);
    CHECK(r.exit_status() == 0);
  }

  TEST_CASE("lp continuity with a zero offset") {
    Config c = small("lp");
    c.set("family.offsets", "0.1,0.05,0");
    const Report r = run_lp_continuity(ExperimentConfig(c));
    CHECK(r.flag("zero_offset_zero_distance").applicable);
    CHECK(r.flag("zero_offset_zero_distance").pass);
    CHECK(r.flag("sup_decreasing").pass);
  }

  TEST_CASE("weak-star with zero amplitude") {
    Config c = small("weakstar");
    c.set("family.amplitude", "0");
    c.set("family.frequencies", "2,4");
    c.set("weakstar.times", "0.2");
    const Report r = run_weak_star(ExperimentConfig(c));
    CHECK(r.flag("zero_amplitude_zero_gap").applicable);
    CHECK(r.flag("zero_amplitude_zero_gap").pass);
    for (const auto& row : r.table("pairing").rows) CHECK(row.back() == 0.0);
  }

  TEST_CASE("refinement with repeated factors is bit-identical") {
    Config c = small("refine");
    c.set("refine.factors", "1,1");
    c.set("weakform.window", "0,0.2");
    const Report r = run_refinement(ExperimentConfig(c));
    CHECK(r.flag("repeat_identical").applicable);
    CHECK(r.flag("repeat_identical").pass);
    CHECK_FALSE(r.flag("defect_ratio").applicable);
  }

  TEST_CASE("exit status") {
    Report r;
    CHECK(r.exit_status() == 4);
    r.flags.push_back({"a", false, false, ""});
    CHECK(r.exit_status() == 4);
    r.flags.push_back({"valid_runs", true, true, "", true});
    CHECK(r.exit_status() == 4);
    r.flags.push_back({"b", true, true, ""});
    CHECK(r.exit_status() == 0);
    r.flags.push_back({"c", true, false, ""});
    CHECK(r.exit_status() == 1);
    CHECK_THROWS(r.flag("missing"));
  }

  TEST_CASE("table csv") {
    const Table t{"x", {"a", "b"}, {{1.0, 0.5}, {2.0, 0.1}}};
    CHECK(t.csv().substr(0, 4) == "a,b\n");
  }
}
