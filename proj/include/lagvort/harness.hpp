#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lagvort/config.hpp"
#include "lagvort/flow.hpp"
#include "lagvort/kernel.hpp"
#include "lagvort/metrics.hpp"
#include "lagvort/vorticity.hpp"

namespace lagvort {

enum class ExperimentKind { Simulate, KernelEstimates, Stability, LpContinuity, WeakStar, TimeContinuity, WeakForm, HolderDecay, Refine };

ExperimentKind experiment_kind(const std::string& name);
std::string experiment_name(ExperimentKind kind);

struct GaussianSpec {
  Vec2 center;
  double width = 0.0;
};

// Typed view of a Config, validated on construction.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Simulate;
  Config raw;
  Domain domain = Domain::disk(1.0);
  VorticitySpec base;
  std::optional<VorticitySpec> second;
  FlowOptions flow;
  double grid_ratio = 2.0;
  double p = 1.0;
  int time_stride = 1;
  std::vector<GaussianSpec> test_functions;

  explicit ExperimentConfig(const Config& cfg);
  // Length unit of offsets: R on the disk, 1 on the plane.
  double length_scale() const { return domain.is_disk() ? domain.radius() : 1.0; }
  double spacing() const { return flow.h / grid_ratio; }
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string csv() const;
};

struct Flag {
  std::string name;
  bool applicable = true;
  bool pass = false;
  std::string detail;
  // Consistency checks that hold in every regime; they can fail a report but never make it applicable.
  bool sanity = false;
};

struct Report {
  std::string experiment;
  Config config;
  KernelCalibration calibration;
  nlohmann::json results = nlohmann::json::object();
  std::vector<Table> tables;
  std::vector<Flag> flags;

  nlohmann::json summary() const;
  // 1 on any applicable failure, 4 when only sanity flags were applicable, else 0.
  int exit_status() const;
  const Flag& flag(const std::string& name) const;
  const Table& table(const std::string& name) const;
};

// Calibrated C(Omega) for the experiment's disk (kernel.radius on the plane), memoized per
// parameter set within the process.
KernelCalibration calibration_for(const ExperimentConfig& cfg);

Report run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out);
Report run_kernel_estimates(const ExperimentConfig& cfg);
Report run_stability(const ExperimentConfig& cfg);
Report run_lp_continuity(const ExperimentConfig& cfg);
Report run_weak_star(const ExperimentConfig& cfg);
Report run_time_continuity(const ExperimentConfig& cfg);
Report run_weakform(const ExperimentConfig& cfg);
Report run_holder(const ExperimentConfig& cfg);
Report run_refinement(const ExperimentConfig& cfg);

// Dispatch on cfg.kind.
Report run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

// One CSV per table plus summary.json and resolved.cfg.
void write_report(const Report& report, const std::filesystem::path& dir);

}  // namespace lagvort
