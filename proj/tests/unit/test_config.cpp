#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "lagvort/config.hpp"
#include "lagvort/errors.hpp"

using namespace lagvort;

TEST_SUITE("config") {
  TEST_CASE("defaults and typed access") {
    const Config c;
    CHECK(c.raw("experiment") == "simulate");
    CHECK(c.number("numerics.T") == 1.0);
    CHECK(c.integer("kernel.samples") == 16);
    CHECK(c.boolean("stability.lp"));
    CHECK(c.is_auto("numerics.delta"));
    CHECK(c.numbers("family.offsets") == std::vector<double>{0.1, 0.01, 0.001});
    CHECK(c.integers("family.frequencies") == std::vector<int>{4, 8, 16, 32});
    const auto g = c.groups("metrics.test_functions");
    REQUIRE(g.size() == 3);
    CHECK(g[1] == std::vector<double>{0.45, 0.2, 0.1});
    CHECK_THROWS_AS(c.number("domain.kind"), ConfigError);
    CHECK_THROWS_AS(c.integer("numerics.dt"), ConfigError);
    CHECK_THROWS_AS(c.boolean("numerics.dt"), ConfigError);
    CHECK_THROWS_AS(c.raw("numerics.nope"), ConfigError);
  }

  TEST_CASE("parsing") {
    const Config c = Config::parse(
        "# header\n"
        "experiment = stability\n"
        "\n"
        "numerics.dt = 0.02   # trailing\n"
        "vorticity.base = {\"kind\": \"disk_patch\", \"center\": [0, 0], \"radius\": 0.2, \"amplitude\": 1} # jsonish\n");
    CHECK(c.raw("experiment") == "stability");
    CHECK(c.number("numerics.dt") == 0.02);
    CHECK(c.raw("vorticity.base").back() == '}');
    CHECK(c.raw("numerics.T") == "1");
    CHECK(Config::parse(c.serialize()) == c);
  }

  TEST_CASE("parse errors name the offending line or key") {
    auto message = [](const char* text) {
      try {
        Config::parse(text, "x.cfg");
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("numerics.T = 1\nbogus.key = 3\n").find("x.cfg:2") != std::string::npos);
    CHECK(message("numerics.T = 1\nbogus.key = 3\n").find("bogus.key") != std::string::npos);
    CHECK(message("numerics.T = 1\nnumerics.T = 2\n").find("already set on line 1") != std::string::npos);
    CHECK(message("just words\n").find("x.cfg:1") != std::string::npos);
  }

  TEST_CASE("overrides") {
    Config c;
    c.apply_override("numerics.h=0.02");
    CHECK(c.number("numerics.h") == 0.02);
    c.apply_override("family.offsets = 0.5, 0.25");
    CHECK(c.numbers("family.offsets") == std::vector<double>{0.5, 0.25});
    CHECK_THROWS_AS(c.apply_override("numerics.h"), ConfigError);
    CHECK_THROWS_WITH_AS(c.apply_override("numerics.hh=1"), doctest::Contains("numerics.hh"), ConfigError);
  }

  TEST_CASE("load from cfg and embedded json") {
    const auto dir = std::filesystem::temp_directory_path() / "lagvort_unit_config";
    std::filesystem::create_directories(dir);
    {
      std::ofstream f(dir / "a.cfg");
      f << "numerics.T = 0.5\n";
    }
    const Config a = Config::load(dir / "a.cfg");
    CHECK(a.number("numerics.T") == 0.5);
    {
      std::ofstream f(dir / "summary.json");
      f << nlohmann::json{{"config", a.to_json()}, {"status", "pass"}}.dump();
    }
    CHECK(Config::load(dir / "summary.json") == a);
    {
      std::ofstream f(dir / "bad.json");
      f << "{\"status\": 1}";
    }
    CHECK_THROWS_AS(Config::load(dir / "bad.json"), ConfigError);
    CHECK_THROWS_WITH_AS(Config::load(dir / "missing.cfg"), doctest::Contains("missing.cfg"), ConfigError);
    std::filesystem::remove_all(dir);
  }
}
