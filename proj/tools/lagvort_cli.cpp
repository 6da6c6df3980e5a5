#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/harness.hpp"
#include "lagvort/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBlowUp = 3;

const std::map<std::string, std::string> kSubcommands = {
    {"simulate", "simulate"},
    {"calibrate-kernel", "kernel"},
    {"verify-stability", "stability"},
    {"verify-lp", "lp"},
    {"verify-weakstar", "weakstar"},
    {"verify-time", "time"},
    {"verify-weakform", "weakform"},
    {"holder", "holder"},
    {"refine", "refine"},
};

struct Invocation {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  unsigned threads = 0;
};

int run(const std::string& experiment, const Invocation& inv) {
  using namespace lagvort;
  Config cfg = inv.config.empty() ? Config() : Config::load(inv.config);
  for (const auto& o : inv.overrides) cfg.apply_override(o);
  cfg.set("experiment", experiment);
  const ExperimentConfig ec(cfg);
  const std::filesystem::path out = std::filesystem::path(inv.out.empty() ? cfg.raw("output.dir") : inv.out);
  set_thread_count(inv.threads);

  const Report rep = run_experiment(ec, out);
  write_report(rep, out);
  for (const Flag& f : rep.flags) {
    const char* tag = !f.applicable ? "N/A " : f.pass ? "PASS" : "FAIL";
    if (f.detail.empty()) {
      fmt::print("{} {}\n", tag, f.name);
    } else {
      fmt::print("{} {} ({})\n", tag, f.name, f.detail);
    }
  }
  fmt::print("{}: {} -> {}\n", rep.experiment, rep.summary()["status"].get<std::string>(), (out / "summary.json").string());
  return rep.exit_status();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian vortex-blob simulator and stability harness for 2D Euler"};
  app.require_subcommand(1);
  Invocation inv;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, experiment] : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, fmt::format("run the {} experiment", experiment));
    sub->add_option("--config", inv.config, "experiment config (.cfg, or a summary.json to rerun)");
    sub->add_option("--set", inv.overrides, "override a config key: --set key=value (repeatable)");
    sub->add_option("--out", inv.out, "output directory (default: output.dir)");
    sub->add_option("--threads", inv.threads, "worker cap, 0 = all cores");
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string experiment;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) experiment = kSubcommands.at(name);
  }
  try {
    return run(experiment, inv);
  } catch (const lagvort::BlowUpError& e) {
    fmt::print(stderr, "blow-up: {}\n", e.what());
    return kExitBlowUp;
  } catch (const lagvort::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const lagvort::ResolutionError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const lagvort::HistoryError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const lagvort::DomainError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
