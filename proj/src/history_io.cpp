#include "lagvort/history_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "lagvort/errors.hpp"

namespace lagvort {

namespace {

std::string snapshot_name(const FlowHistory& history, int k) {
  return fmt::format("snapshot_{:05d}.csv", k - history.first_index());
}

nlohmann::json domain_json(const Domain& d) {
  nlohmann::json j;
  j["kind"] = d.is_disk() ? "disk" : "plane";
  if (d.is_disk()) j["radius"] = d.radius();
  return j;
}

}  // namespace

nlohmann::json history_manifest(const FlowHistory& history) {
  nlohmann::json m;
  m["dt"] = history.dt();
  m["T"] = history.t_max();
  m["t_min"] = history.t_min();
  m["h"] = history.h();
  m["delta"] = history.delta();
  m["domain"] = domain_json(history.domain());
  const SummationStrategy& s = history.strategy();
  m["strategy"] = {{"kind", s.kind == SummationKind::Direct ? "direct" : "treecode"},
                   {"theta", s.theta},
                   {"order", s.order}};
  m["particles"] = history.particle_count();
  m["projections"] = history.projections();
  m["valid"] = history.valid();
  nlohmann::json files = nlohmann::json::array();
  for (int k = history.first_index(); k <= history.last_index(); ++k) {
    files.push_back({{"t", history.time(k)}, {"file", snapshot_name(history, k)}});
  }
  m["snapshots"] = files;
  return m;
}

std::string snapshot_csv(const FlowHistory& history, int k) {
  const auto pos = history.positions(k);
  const auto& parts = history.initial().particles;
  std::string out = "t,label_x,label_y,pos_x,pos_y,vorticity,weight\n";
  const double t = history.time(k);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Particle& p = parts[i];
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", t, p.label.x, p.label.y, pos[i].x,
                       pos[i].y, p.vorticity, p.weight);
  }
  return out;
}

void export_history(const FlowHistory& history, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int k = history.first_index(); k <= history.last_index(); ++k) {
    std::ofstream f(dir / snapshot_name(history, k), std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot write {}", (dir / snapshot_name(history, k)).string()));
    f << snapshot_csv(history, k);
  }
  std::ofstream m(dir / "manifest.json", std::ios::binary);
  if (!m) throw ConfigError(fmt::format("cannot write {}", (dir / "manifest.json").string()));
  m << history_manifest(history).dump(2) << "\n";
}

}  // namespace lagvort
