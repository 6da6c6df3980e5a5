#include "lagvort/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "lagvort/errors.hpp"
#include "lagvort/history_io.hpp"

namespace lagvort {

namespace {

const std::map<std::string, ExperimentKind>& kind_names() {
  static const std::map<std::string, ExperimentKind> m = {
      {"simulate", ExperimentKind::Simulate},     {"kernel", ExperimentKind::KernelEstimates},
      {"stability", ExperimentKind::Stability},   {"lp", ExperimentKind::LpContinuity},
      {"weakstar", ExperimentKind::WeakStar},     {"time", ExperimentKind::TimeContinuity},
      {"weakform", ExperimentKind::WeakForm},     {"holder", ExperimentKind::HolderDecay},
      {"refine", ExperimentKind::Refine},
  };
  return m;
}

VorticitySpec parse_spec(const std::string& key, const std::string& value) {
  std::string text = value;
  if (value.empty() || value.front() != '{') {
    std::ifstream f(value, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("{}: cannot read vorticity file '{}'", key, value));
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  try {
    return VorticitySpec::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Vec2 unit_direction(const Config& c) {
  const auto d = c.numbers("family.direction");
  require(d.size() == 2, "family.direction needs two components");
  const double n = std::hypot(d[0], d[1]);
  require(n > 0.0, "family.direction must be nonzero");
  return {d[0] / n, d[1] / n};
}

FlowHistory simulate(const ExperimentConfig& cfg, const VorticitySpec& spec, bool bidirectional) {
  FlowOptions o = cfg.flow;
  o.bidirectional = bidirectional;
  return forward_flow(spec, o);
}

std::vector<int> strided_indices(const FlowHistory& h, int stride) {
  std::vector<int> idx;
  for (int k = 0; k < h.last_index(); k += stride) idx.push_back(k);
  idx.push_back(h.last_index());
  return idx;
}

Flag valid_runs_flag(std::initializer_list<const FlowHistory*> hs) {
  Flag f{"valid_runs", true, true, "", true};
  for (const FlowHistory* h : hs) {
    if (!h->valid()) {
      f.pass = false;
      f.detail = fmt::format("{} of {} particles projected", h->projected_particles(), h->particle_count());
    }
  }
  return f;
}

Flag valid_runs_flag(const std::vector<FlowHistory>& hs) {
  Flag f{"valid_runs", true, true, "", true};
  for (const FlowHistory& h : hs) {
    if (!h.valid()) {
      f.pass = false;
      f.detail = fmt::format("{} of {} particles projected", h.projected_particles(), h.particle_count());
    }
  }
  return f;
}

double pairing_on_grid(const QuadratureGrid& g, std::span<const double> w, const GaussianSpec& f) {
  double s = 0.0;
  const double w2 = f.width * f.width;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (w[i] != 0.0) s += w[i] * std::exp(-norm2(g.points[i] - f.center) / w2);
  }
  return s * g.cell_area();
}

// Least-squares slope of log y on log x.
double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ||a - b||_{L^1} of two initial data: exact for equal disk patches, else a fine lattice.
std::pair<double, std::string> initial_l1(const VorticitySpec& a, const VorticitySpec& b, const Domain& dom,
                                          double spacing) {
  const auto* pa = std::get_if<DiskPatch>(&a.variant());
  const auto* pb = std::get_if<DiskPatch>(&b.variant());
  if (pa && pb && pa->radius == pb->radius && pa->amplitude == pb->amplitude) {
    return {std::abs(pa->amplitude) * disk_symmetric_difference(pa->radius, norm(pa->center - pb->center)), "exact"};
  }
  const auto g = QuadratureGrid::lattice(merge(a.support_box(), b.support_box()), spacing, dom);
  double s = 0.0;
  for (const Vec2& p : g.points) s += std::abs(a(p) - b(p));
  return {s * g.cell_area(), "quadrature"};
}

nlohmann::json calibration_json(const KernelCalibration& c) {
  return {{"C1", c.c1},
          {"C1_half_samples", c.c1_half},
          {"C2", c.c2},
          {"C2_coarse", c.c2_coarse},
          {"C", c.constant()},
          {"max_error_bar", c.max_error_bar},
          {"c1_pairs", c.c1_pairs},
          {"c2_pairs", c.c2_pairs},
          {"resolution", c.resolution},
          {"min_separation", c.min_separation},
          {"max_separation", c.max_separation}};
}

nlohmann::json embedded_config(const Config& c) {
  nlohmann::json j = c.to_json();
  j.erase("output.dir");
  return j;
}

Report new_report(const ExperimentConfig& cfg, bool calibrate = true) {
  Report r;
  r.experiment = experiment_name(cfg.kind);
  r.config = cfg.raw;
  if (calibrate) r.calibration = calibration_for(cfg);
  return r;
}

}  // namespace

ExperimentKind experiment_kind(const std::string& name) {
  const auto it = kind_names().find(name);
  if (it == kind_names().end()) throw ConfigError(fmt::format("experiment: unknown kind '{}'", name));
  return it->second;
}

std::string experiment_name(ExperimentKind kind) {
  for (const auto& [name, k] : kind_names()) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentConfig::ExperimentConfig(const Config& c) : raw(c) {
  kind = experiment_kind(c.raw("experiment"));
  const std::string dk = c.raw("domain.kind");
  if (dk == "disk") {
    const double R = c.number("domain.radius");
    require(R > 0.0, fmt::format("domain.radius must be positive, got {}", R));
    domain = Domain::disk(R);
  } else if (dk == "plane") {
    domain = Domain::plane();
  } else {
    throw ConfigError(fmt::format("domain.kind: expected disk or plane, got '{}'", dk));
  }
  base = parse_spec("vorticity.base", c.raw("vorticity.base"));
  if (c.raw("vorticity.second") != "none") second = parse_spec("vorticity.second", c.raw("vorticity.second"));

  flow.domain = domain;
  flow.T = c.number("numerics.T");
  flow.dt = c.number("numerics.dt");
  flow.h = c.number("numerics.h");
  require(flow.T >= 0.0, fmt::format("numerics.T must be >= 0, got {}", flow.T));
  require(flow.dt > 0.0, fmt::format("numerics.dt must be positive, got {}", flow.dt));
  require(flow.h > 0.0, fmt::format("numerics.h must be positive, got {}", flow.h));
  if (!c.is_auto("numerics.delta")) {
    flow.delta = c.number("numerics.delta");
    require(flow.delta >= 0.0, fmt::format("numerics.delta must be >= 0, got {}", flow.delta));
  }
  const std::string strategy = c.raw("numerics.strategy");
  if (strategy == "direct") {
    flow.strategy = SummationStrategy::direct();
  } else if (strategy == "treecode") {
    flow.strategy = SummationStrategy::treecode(c.number("numerics.theta"), c.integer("numerics.order"));
  } else {
    throw ConfigError(fmt::format("numerics.strategy: expected direct or treecode, got '{}'", strategy));
  }
  try {
    flow.strategy.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("numerics: {}", e.what()));
  }
  grid_ratio = c.number("numerics.grid_ratio");
  require(grid_ratio >= 2.0, fmt::format("numerics.grid_ratio must be >= 2, got {}", grid_ratio));
  p = c.number("metrics.p");
  require(p >= 1.0 && std::isfinite(p), fmt::format("metrics.p must be in [1, inf), got {}", p));
  time_stride = c.integer("metrics.time_stride");
  require(time_stride >= 1, "metrics.time_stride must be >= 1");
  for (const auto& g : c.groups("metrics.test_functions")) {
    require(g.size() == 3, "metrics.test_functions: each entry is x,y,width");
    require(g[2] > 0.0, "metrics.test_functions: widths must be positive");
    test_functions.push_back({{g[0], g[1]}, g[2]});
  }
  require(!test_functions.empty(), "metrics.test_functions: need at least one test function");
  if (kind == ExperimentKind::WeakStar) {
    for (int n : c.integers("family.frequencies")) {
      require(n > 0, "family.frequencies must be positive");
      if (n > 1.0 / (4.0 * flow.h)) {
        throw ResolutionError(fmt::format("family.frequencies: n = {} exceeds 1/(4h) = {} at h = {}", n,
                                          1.0 / (4.0 * flow.h), flow.h));
      }
    }
  }
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += fmt::format("{:.17g}", row[i]);
    }
    out += "\n";
  }
  return out;
}

nlohmann::json Report::summary() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["config"] = embedded_config(config);
  j["kernel_calibration"] = calibration_json(calibration);
  j["results"] = results;
  nlohmann::json flags_json = nlohmann::json::array();
  for (const Flag& f : flags) {
    flags_json.push_back(
        {{"name", f.name}, {"applicable", f.applicable}, {"pass", f.pass}, {"sanity", f.sanity}, {"detail", f.detail}});
  }
  j["flags"] = flags_json;
  nlohmann::json names = nlohmann::json::array();
  for (const Table& t : tables) names.push_back(t.name + ".csv");
  j["tables"] = names;
  const int status = exit_status();
  j["status"] = status == 0 ? "pass" : status == 4 ? "not_applicable" : "fail";
  return j;
}

int Report::exit_status() const {
  bool any = false;
  for (const Flag& f : flags) {
    if (!f.applicable) continue;
    if (!f.pass) return 1;
    any = any || !f.sanity;
  }
  return any ? 0 : 4;
}

const Flag& Report::flag(const std::string& name) const {
  for (const Flag& f : flags) {
    if (f.name == name) return f;
  }
  throw Error(fmt::format("report has no flag '{}'", name));
}

const Table& Report::table(const std::string& name) const {
  for (const Table& t : tables) {
    if (t.name == name) return t;
  }
  throw Error(fmt::format("report has no table '{}'", name));
}

KernelCalibration calibration_for(const ExperimentConfig& cfg) {
  using Key = std::tuple<double, int, int, double, long long>;
  static std::mutex mu;
  static std::map<Key, KernelCalibration> cache;
  const Config& c = cfg.raw;
  const double R = cfg.domain.is_disk() ? cfg.domain.radius() : c.number("kernel.radius");
  require(R > 0.0, "kernel.radius must be positive");
  const int samples = c.integer("kernel.samples");
  const int resolution = c.integer("kernel.resolution");
  const double min_sep = c.number("kernel.min_separation");
  const long long seed = static_cast<long long>(c.number("kernel.seed"));
  require(samples >= 1, "kernel.samples must be >= 1");
  require(resolution >= 1, "kernel.resolution must be >= 1");
  require(min_sep > 0.0 && min_sep < 1.0, "kernel.min_separation must be in (0, 1)");
  const Key key{R, samples, resolution, min_sep, seed};
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto cal = verify_kernel_estimates(KernelSpec(Domain::disk(R), 0.0), static_cast<std::size_t>(samples),
                                           resolution, min_sep, static_cast<std::uint64_t>(seed));
  cache.emplace(key, cal);
  return cal;
}

Report run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  Report rep = new_report(cfg, false);
  const FlowHistory h = simulate(cfg, cfg.base, false);
  Table inv{"invariants", {"t", "total_circulation", "max_speed"}, {}};
  const double gamma0 = h.initial().total_circulation();
  double drift = 0.0;
  for (int k = h.first_index(); k <= h.last_index(); ++k) {
    const double g = h.snapshot(k).total_circulation();
    drift = std::max(drift, std::abs(g - gamma0) / std::max(std::abs(gamma0), 1e-300));
    inv.rows.push_back({h.time(k), g, h.max_speed(k)});
  }
  rep.tables.push_back(std::move(inv));
  rep.results["particles"] = h.particle_count();
  rep.results["snapshots"] = h.snapshot_count();
  rep.results["circulation"] = gamma0;
  rep.results["circulation_drift"] = drift;
  rep.results["projections"] = h.projections();
  rep.flags.push_back({"circulation_conserved", true, drift <= 1e-6, fmt::format("relative drift {:.3e}", drift)});
  rep.flags.push_back(valid_runs_flag({&h}));
  if (cfg.raw.boolean("simulate.export")) {
    export_history(h, out / "history");
    rep.results["history"] = "history/manifest.json";
  }
  return rep;
}

Report run_kernel_estimates(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg, false);
  try {
    rep.calibration = calibration_for(cfg);
  } catch (const QuadratureError& e) {
    rep.flags.push_back({"quadrature_converged", true, false, e.what()});
    return rep;
  }
  const KernelCalibration& c = rep.calibration;
  rep.tables.push_back({"kernel",
                        {"C1", "C1_half_samples", "C2", "C2_coarse", "max_error_bar"},
                        {{c.c1, c.c1_half, c.c2, c.c2_coarse, c.max_error_bar}}});
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  const double c1_change = std::abs(c.c1 - c.c1_half) / c.c1;
  const double c2_change = std::abs(c.c2 - c.c2_coarse) / c.c2;
  rep.flags.push_back({"quadrature_converged", true, true, ""});
  rep.flags.push_back({"C1_finite", true, finite_pos(c.c1), fmt::format("C1 = {}", c.c1)});
  rep.flags.push_back({"C2_finite", true, finite_pos(c.c2), fmt::format("C2 = {}", c.c2)});
  rep.flags.push_back({"C1_sample_stable", true, c1_change <= 0.05, fmt::format("change {:.3e}", c1_change)});
  rep.flags.push_back({"C2_refinement_stable", true, c2_change <= 0.05, fmt::format("change {:.3e}", c2_change)});

  // Separations ten times below the calibrated range stay under C2.
  const Domain disk = Domain::disk(c.max_separation);
  const double R = c.max_separation;
  const double s = c.min_separation / 10.0;
  Table finer{"finer_separation", {"ax", "ay", "separation", "ratio"}, {}};
  bool bounded = true;
  for (Vec2 a : {Vec2{0.0, 0.0}, Vec2{0.5 * R, 0.0}, Vec2{-0.3 * R, 0.6 * R}, Vec2{0.1 * R, -0.85 * R}}) {
    const auto sample = kernel_difference_integral(disk, a, a + Vec2{s, 0.0}, c.resolution, c.c1);
    finer.rows.push_back({a.x, a.y, s, sample.ratio});
    bounded = bounded && sample.ratio <= c.c2;
  }
  rep.tables.push_back(std::move(finer));
  rep.flags.push_back({"finer_separation_bounded", true, bounded, ""});
  rep.results["C"] = c.constant();
  return rep;
}

Report run_stability(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const double L = cfg.length_scale();
  const VorticitySpec a = cfg.base;
  const VorticitySpec b =
      cfg.second ? *cfg.second : a.translated(cfg.raw.number("stability.offset") * L * unit_direction(cfg.raw));
  const auto times = cfg.raw.numbers("stability.times");
  require(!times.empty(), "stability.times is empty");
  for (double t : times) {
    require(std::abs(t) <= cfg.flow.T * (1 + 1e-12), fmt::format("stability.times: {} lies outside [-T, T]", t));
  }
  const FlowHistory h1 = simulate(cfg, a, true);
  const FlowHistory h2 = simulate(cfg, b, true);

  StabilityBound bound;
  bound.C = rep.calibration.constant();
  bound.T = cfg.flow.T;
  bound.M = a.sup_norm();
  const auto [z, z_method] = initial_l1(a, b, cfg.domain, cfg.spacing() / 8.0);
  bound.z = z;
  const double phi = phi_T_M(bound);

  const auto tracers = eta_tracers(cfg.domain, a, b, cfg.raw.number("stability.eta_spacing"));
  const auto table = eta_table(h1, h2, times, tracers);

  Table eta_rows{"eta", {"t", "r", "eta", "bound", "applicable"}, {}};
  Table osgood_rows{"osgood", {"t", "r", "eta", "bound", "applicable"}, {}};
  bool diag = true, nonneg = true, two_ok = true, osg_ok = true, two_app = false, osg_app = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double e = table[i][j];
      const BoundValue tb = eta_two_time_bound(bound, times[i], times[j]);
      eta_rows.rows.push_back({times[i], times[j], e, tb.value, tb.applicable ? 1.0 : 0.0});
      if (times[i] == times[j]) diag = diag && e == 0.0;
      nonneg = nonneg && e >= 0.0;
      if (tb.applicable) {
        two_app = true;
        two_ok = two_ok && e <= tb.value;
      }
      if (times[i] == 0.0) {
        const BoundValue ob = osgood_eta_bound(bound, times[j]);
        osgood_rows.rows.push_back({0.0, times[j], e, ob.value, ob.applicable ? 1.0 : 0.0});
        if (ob.applicable) {
          osg_app = true;
          osg_ok = osg_ok && e <= ob.value;
        }
      }
    }
  }
  rep.tables.push_back(std::move(eta_rows));
  rep.tables.push_back(std::move(osgood_rows));

  if (cfg.raw.boolean("stability.lp")) {
    Table lp{"lp_distance", {"t", "distance"}, {}};
    const Solution s1{&h1, a}, s2{&h2, b};
    for (double t : times) lp.rows.push_back({t, lp_distance(s1, s2, cfg.p, t, cfg.spacing())});
    rep.tables.push_back(std::move(lp));
  }

  rep.results["C"] = bound.C;
  rep.results["T"] = bound.T;
  rep.results["M"] = bound.M;
  rep.results["z"] = bound.z;
  rep.results["z_method"] = z_method;
  rep.results["Phi"] = phi;
  rep.results["osgood_threshold"] = std::exp(1.0 - std::exp(bound.C * bound.T * bound.M));
  rep.results["two_time_threshold"] = std::exp(1.0 - std::exp(2.0 * bound.C * bound.T * bound.M));
  rep.results["tracers"] = tracers.points.size();
  rep.flags.push_back({"eta_diagonal_zero", true, diag && nonneg, "", true});
  rep.flags.push_back({"osgood_dominance", osg_app, osg_ok, osg_app ? "" : "smallness condition fails"});
  rep.flags.push_back({"two_time_dominance", two_app, two_ok, two_app ? "" : "smallness condition fails"});
  rep.flags.push_back(valid_runs_flag({&h1, &h2}));
  return rep;
}

Report run_lp_continuity(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const double L = cfg.length_scale();
  const auto offsets = cfg.raw.numbers("family.offsets");
  require(!offsets.empty(), "family.offsets is empty");
  const std::string fk = cfg.raw.raw("family.kind");
  const Vec2 dir = unit_direction(cfg.raw);
  std::vector<VorticitySpec> members;
  for (double o : offsets) {
    if (fk == "offset") {
      members.push_back(cfg.base.translated(o * L * dir));
    } else if (fk == "radius") {
      const auto* p = std::get_if<DiskPatch>(&cfg.base.variant());
      require(p != nullptr, "family.kind = radius needs a disk_patch base");
      members.push_back(VorticitySpec::patch(p->center, p->radius * (1.0 + o), p->amplitude));
    } else {
      throw ConfigError(fmt::format("family.kind: expected offset or radius, got '{}'", fk));
    }
  }
  const FlowHistory hb = simulate(cfg, cfg.base, false);
  std::vector<FlowHistory> hs;
  for (const auto& m : members) hs.push_back(simulate(cfg, m, false));
  std::vector<Solution> sols{{&hb, cfg.base}};
  for (std::size_t i = 0; i < members.size(); ++i) sols.push_back({&hs[i], members[i]});

  Table dist{"lp_distance", {"offset", "t", "distance"}, {}};
  std::vector<double> initial(members.size(), 0.0), sup(members.size(), 0.0);
  for (int k : strided_indices(hb, cfg.time_stride)) {
    const double t = hb.time(k);
    const QuadratureGrid grid = solution_grid(sols, t, cfg.spacing());
    const auto vb = solution_on_grid(sols[0], grid, t);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto vm = solution_on_grid(sols[i + 1], grid, t);
      const double d = grid_lp(vm, vb, cfg.p, grid.cell_area());
      dist.rows.push_back({offsets[i], t, d});
      if (k == 0) initial[i] = d;
      sup[i] = std::max(sup[i], d);
    }
  }
  rep.tables.push_back(std::move(dist));
  Table sups{"lp_sup", {"offset", "initial_distance", "sup_distance"}, {}};
  for (std::size_t i = 0; i < members.size(); ++i) sups.rows.push_back({offsets[i], initial[i], sup[i]});
  rep.tables.push_back(std::move(sups));

  // Members with nontrivial data, ordered by decreasing offset.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (initial[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return std::abs(offsets[x]) > std::abs(offsets[y]); });
  bool decreasing = true;
  for (std::size_t j = 1; j < order.size(); ++j) decreasing = decreasing && sup[order[j]] < sup[order[j - 1]];
  const bool fit = order.size() >= 2;
  double slope = NAN;
  if (fit) {
    std::vector<double> x, y;
    for (auto i : order) {
      x.push_back(initial[i]);
      y.push_back(sup[i]);
    }
    slope = loglog_slope(x, y);
  }
  const double min_slope = cfg.raw.number("lp.min_slope");
  rep.results["slope"] = fit ? nlohmann::json(slope) : nlohmann::json(nullptr);
  rep.results["initial_distance"] = initial;
  rep.results["sup_distance"] = sup;
  rep.flags.push_back({"sup_decreasing", fit, decreasing, ""});
  rep.flags.push_back({"loglog_slope", fit, fit && slope > min_slope, fmt::format("slope {:.4f}, need > {}", slope, min_slope)});

  bool any_zero = false, zero_ok = true;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (offsets[i] != 0.0) continue;
    any_zero = true;
    zero_ok = zero_ok && sup[i] == 0.0;
  }
  rep.flags.push_back({"zero_offset_zero_distance", any_zero, zero_ok, ""});
  rep.flags.push_back(valid_runs_flag(hs));
  if (!hb.valid()) rep.flags.back().pass = false;
  return rep;
}

Report run_weak_star(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const auto freqs = cfg.raw.integers("family.frequencies");
  require(!freqs.empty(), "family.frequencies is empty");
  const double A = cfg.raw.number("family.amplitude");
  const auto family = make_weak_star_family(cfg.base, A, freqs, cfg.raw.integer("family.axis"));
  auto times = cfg.raw.numbers("weakstar.times");
  require(!times.empty(), "weakstar.times is empty");
  if (std::find(times.begin(), times.end(), 0.0) == times.end()) times.insert(times.begin(), 0.0);
  std::sort(times.begin(), times.end());

  const FlowHistory hb = simulate(cfg, cfg.base, false);
  std::vector<FlowHistory> hs;
  for (const auto& m : family) hs.push_back(simulate(cfg, m, false));
  std::vector<Solution> sols{{&hb, cfg.base}};
  for (std::size_t i = 0; i < family.size(); ++i) sols.push_back({&hs[i], family[i]});

  const std::size_t nf = cfg.test_functions.size();
  Table pairing{"pairing", {"t", "n", "f", "pairing", "base_pairing", "abs_gap"}, {}};
  Table strong{"strong", {"t", "n", "l2_distance"}, {}};
  // gap[t][i][f], l2[t][i]
  std::vector<std::vector<std::vector<double>>> gap(times.size());
  std::vector<std::vector<double>> l2(times.size());
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    const QuadratureGrid grid = solution_grid(sols, t, cfg.spacing());
    const auto vb = solution_on_grid(sols[0], grid, t);
    std::vector<double> base_pair(nf);
    for (std::size_t f = 0; f < nf; ++f) base_pair[f] = pairing_on_grid(grid, vb, cfg.test_functions[f]);
    gap[ti].assign(family.size(), std::vector<double>(nf, 0.0));
    l2[ti].assign(family.size(), 0.0);
    for (std::size_t i = 0; i < family.size(); ++i) {
      const auto vn = solution_on_grid(sols[i + 1], grid, t);
      for (std::size_t f = 0; f < nf; ++f) {
        const double pn = pairing_on_grid(grid, vn, cfg.test_functions[f]);
        gap[ti][i][f] = std::abs(pn - base_pair[f]);
        pairing.rows.push_back({t, double(freqs[i]), double(f), pn, base_pair[f], gap[ti][i][f]});
      }
      l2[ti][i] = grid_lp(vn, vb, 2.0, grid.cell_area());
      strong.rows.push_back({t, double(freqs[i]), l2[ti][i]});
    }
  }
  rep.tables.push_back(std::move(pairing));
  rep.tables.push_back(std::move(strong));

  // Compare the second frequency (past the first octave) with the last, at the final time.
  const std::size_t last = times.size() - 1;
  const std::size_t ref = family.size() >= 3 ? 1 : 0;
  const bool comparable = A != 0.0 && family.size() >= 2;
  const double need = cfg.raw.number("weakstar.gap_ratio");
  for (std::size_t f = 0; f < nf; ++f) {
    const double g_ref = gap[last][ref][f], g_end = gap[last].back()[f];
    rep.flags.push_back({fmt::format("gap_decay_f{}", f), comparable, g_end * need <= g_ref,
                         fmt::format("t = {}: gap(n = {}) = {:.4e}, gap(n = {}) = {:.4e}", times[last], freqs[ref], g_ref,
                                     freqs.back(), g_end)});
  }
  const double keep = cfg.raw.number("weakstar.strong_ratio");
  const double l2_ref = l2[last][ref], l2_end = l2[last].back();
  rep.flags.push_back({"strong_distance_persists", comparable, l2_end >= keep * l2_ref,
                       fmt::format("L2(n = {}) = {:.4e}, L2(n = {}) = {:.4e}", freqs[ref], l2_ref, freqs.back(), l2_end)});
  bool zero = true;
  for (const auto& gt : gap) {
    for (const auto& gi : gt) {
      for (double g : gi) zero = zero && g == 0.0;
    }
  }
  rep.flags.push_back({"zero_amplitude_zero_gap", A == 0.0, zero, ""});
  rep.flags.push_back(valid_runs_flag(hs));
  if (!hb.valid()) rep.flags.back().pass = false;
  rep.results["sup_norm_bound"] = cfg.base.sup_norm() + std::abs(A);
  return rep;
}

Report run_time_continuity(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const FlowHistory h = simulate(cfg, cfg.base, false);
  const Solution sol{&h, cfg.base};
  const auto times = cfg.raw.numbers("time.times");
  const auto lags = cfg.raw.integers("time.lags");
  require(!times.empty() && !lags.empty(), "time.times and time.lags must be nonempty");
  std::set<int> needed;
  for (double t : times) {
    const int k = h.index_of(t);
    needed.insert(k);
    for (int l : lags) {
      require(l >= 0, "time.lags must be >= 0");
      if (k + l > h.last_index()) {
        throw ConfigError(fmt::format("time.lags: t = {} plus {} steps passes T = {}", t, l, h.t_max()));
      }
      needed.insert(k + l);
    }
  }
  const double t_far = h.time(*needed.rbegin());
  const QuadratureGrid grid = solution_grid(std::span<const Solution>(&sol, 1), t_far, cfg.spacing());
  std::map<int, std::vector<double>> w;
  for (int k : needed) w[k] = solution_on_grid(sol, grid, h.time(k));
  const GaussianSpec& f = cfg.test_functions.front();

  Table inc{"increments", {"t", "lag", "lp_increment", "pairing_increment"}, {}};
  bool monotone = true;
  for (double t : times) {
    const int k = h.index_of(t);
    const double g0 = pairing_on_grid(grid, w[k], f);
    double prev = -1.0;
    std::vector<int> sorted = lags;
    std::sort(sorted.begin(), sorted.end());
    for (int l : sorted) {
      const double d = grid_lp(w[k + l], w[k], cfg.p, grid.cell_area());
      const double g = std::abs(pairing_on_grid(grid, w[k + l], f) - g0);
      inc.rows.push_back({t, l * h.dt(), d, g});
      monotone = monotone && d >= prev;
      prev = d;
    }
  }
  rep.tables.push_back(std::move(inc));
  rep.flags.push_back({"lp_increment_monotone", lags.size() >= 2, monotone, ""});
  rep.flags.push_back(valid_runs_flag({&h}));
  return rep;
}

namespace {

TestFunction weakform_test_function(const Config& c) {
  const auto g = c.numbers("weakform.test_function");
  require(g.size() == 3 && g[2] > 0.0, "weakform.test_function: expected x,y,width with width > 0");
  return gaussian_test_function({g[0], g[1]}, g[2]);
}

std::pair<double, double> weakform_window(const Config& c) {
  const auto w = c.numbers("weakform.window");
  require(w.size() == 2 && w[0] < w[1], "weakform.window: expected t1,t2 with t1 < t2");
  return {w[0], w[1]};
}

}  // namespace

Report run_weakform(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const FlowHistory h = simulate(cfg, cfg.base, false);
  const Solution sol{&h, cfg.base};
  const auto [t1, t2] = weakform_window(cfg.raw);
  const double r = weakform_residual(sol, weakform_test_function(cfg.raw), t1, t2, cfg.spacing(), cfg.time_stride);
  const double tol = cfg.raw.number("weakform.tolerance");
  rep.tables.push_back({"residual", {"t1", "t2", "stride", "residual"}, {{t1, t2, double(cfg.time_stride), r}}});
  rep.results["residual"] = r;
  rep.flags.push_back({"residual_within_tolerance", true, r <= tol, fmt::format("{:.4e} vs {}", r, tol)});
  rep.flags.push_back(valid_runs_flag({&h}));
  return rep;
}

Report run_holder(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  auto times = cfg.raw.numbers("holder.times");
  require(!times.empty(), "holder.times is empty");
  for (double t : times) {
    require(t >= 0.0 && t <= cfg.flow.T * (1 + 1e-12), fmt::format("holder.times: {} lies outside [0, T]", t));
  }
  if (std::find(times.begin(), times.end(), 0.0) == times.end()) times.insert(times.begin(), 0.0);
  std::sort(times.begin(), times.end());
  const FlowHistory h = simulate(cfg, cfg.base, false);
  const double s_min = cfg.raw.is_auto("holder.s_min") ? h.h() : cfg.raw.number("holder.s_min");
  const double s_max = s_min * std::exp2(cfg.raw.number("holder.octaves"));
  const int pairs = cfg.raw.integer("holder.pairs");
  require(pairs >= 2, "holder.pairs must be >= 2");
  const auto seed = static_cast<std::uint64_t>(cfg.raw.number("holder.seed"));
  const double M = cfg.base.sup_norm();

  std::vector<double> alpha;
  for (double t : times) alpha.push_back(holder_exponent(h, t, pairs, s_min, s_max, seed).alpha);
  double c_hat = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > 0.0 && M > 0.0 && alpha[i] < 1.0) c_hat = std::max(c_hat, -std::log(alpha[i]) / (times[i] * M));
  }
  Table tab{"holder", {"t", "alpha", "lower_bound"}, {}};
  bool nonincreasing = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    tab.rows.push_back({times[i], alpha[i], std::exp(-c_hat * times[i] * M)});
    if (i > 0 && times[i - 1] > 0.0) nonincreasing = nonincreasing && alpha[i] <= alpha[i - 1];
  }
  rep.tables.push_back(std::move(tab));
  rep.results["C_hat"] = c_hat;
  rep.results["s_min"] = s_min;
  rep.results["s_max"] = s_max;
  rep.flags.push_back({"alpha_at_zero", true, std::abs(alpha.front() - 1.0) <= 1e-3, fmt::format("{:.6f}", alpha.front())});
  rep.flags.push_back({"alpha_nonincreasing", times.size() >= 3, nonincreasing, ""});
  rep.flags.push_back(valid_runs_flag({&h}));
  return rep;
}

Report run_refinement(const ExperimentConfig& cfg) {
  Report rep = new_report(cfg);
  const std::string param = cfg.raw.raw("refine.parameter");
  require(param == "h" || param == "dt" || param == "delta",
          fmt::format("refine.parameter: expected h, dt or delta, got '{}'", param));
  const auto factors = cfg.raw.numbers("refine.factors");
  require(factors.size() >= 2, "refine.factors needs at least two values");
  for (double f : factors) require(f > 0.0, "refine.factors must be positive");
  require(cfg.flow.T > 0.0, "refinement needs T > 0");
  const TestFunction phi = weakform_test_function(cfg.raw);
  const auto [t1, t2] = weakform_window(cfg.raw);
  const auto offsets = cfg.raw.numbers("family.offsets");
  const bool with_lp = cfg.raw.boolean("refine.lp") && !offsets.empty();
  const double delta0 = cfg.flow.delta < 0.0 ? 0.8 * cfg.flow.h : cfg.flow.delta;

  Table tab{"refinement", {"factor", "value", "composition_defect", "weakform_residual", "lp_distance"}, {}};
  for (double f : factors) {
    ExperimentConfig c = cfg;
    int stride = cfg.time_stride;
    double value = 0.0;
    if (param == "dt") {
      require(f == std::floor(f), "refine.factors must be integers for dt");
      c.flow.dt = cfg.flow.dt / f;
      stride = static_cast<int>(cfg.time_stride * f);
      value = c.flow.dt;
    } else if (param == "h") {
      c.flow.h = cfg.flow.h / f;
      if (cfg.flow.delta >= 0.0) c.flow.delta = cfg.flow.delta;
      value = c.flow.h;
    } else {
      c.flow.delta = delta0 / f;
      value = c.flow.delta;
    }
    const FlowHistory h = simulate(c, c.base, false);
    const double defect = composition_defect(h, c.flow.T);
    const double resid = weakform_residual({&h, c.base}, phi, t1, t2, c.spacing(), stride);
    double lp = NAN;
    if (with_lp) {
      const VorticitySpec other = c.base.translated(offsets.front() * c.length_scale() * unit_direction(c.raw));
      const FlowHistory h2 = simulate(c, other, false);
      lp = lp_distance({&h, c.base}, {&h2, other}, c.p, c.flow.T, c.spacing());
    }
    tab.rows.push_back({f, value, defect, resid, lp});
  }

  nlohmann::json orders = nlohmann::json::array();
  bool defect_ok = true, resid_ok = true, ordered = false, identical = true, repeated = false;
  for (std::size_t i = 0; i + 1 < tab.rows.size(); ++i) {
    const auto& a = tab.rows[i];
    const auto& b = tab.rows[i + 1];
    if (a[0] == b[0]) {
      repeated = true;
      for (std::size_t j = 0; j < a.size(); ++j) {
        identical = identical && (std::memcmp(&a[j], &b[j], sizeof(double)) == 0);
      }
      continue;
    }
    ordered = true;
    const double lr = std::log(b[0] / a[0]);
    orders.push_back({{"from", a[0]},
                      {"to", b[0]},
                      {"composition_defect", std::log(a[2] / b[2]) / lr},
                      {"weakform_residual", std::log(a[3] / b[3]) / lr},
                      {"lp_distance", std::log(a[4] / b[4]) / lr}});
    defect_ok = defect_ok && a[2] / b[2] >= std::pow(1.8, std::log2(b[0] / a[0]));
    resid_ok = resid_ok && b[3] < a[3];
  }
  rep.tables.push_back(std::move(tab));
  rep.results["parameter"] = param;
  rep.results["orders"] = orders;
  rep.flags.push_back({"repeat_identical", repeated, identical, ""});
  rep.flags.push_back({"defect_ratio", ordered && param == "dt", defect_ok, "ratio >= 1.8 per halving"});
  rep.flags.push_back({"residual_decreasing", ordered && param == "h", resid_ok, ""});
  return rep;
}

Report run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  switch (cfg.kind) {
    case ExperimentKind::Simulate: return run_simulate(cfg, out);
    case ExperimentKind::KernelEstimates: return run_kernel_estimates(cfg);
    case ExperimentKind::Stability: return run_stability(cfg);
    case ExperimentKind::LpContinuity: return run_lp_continuity(cfg);
    case ExperimentKind::WeakStar: return run_weak_star(cfg);
    case ExperimentKind::TimeContinuity: return run_time_continuity(cfg);
    case ExperimentKind::WeakForm: return run_weakform(cfg);
    case ExperimentKind::HolderDecay: return run_holder(cfg);
    case ExperimentKind::Refine: return run_refinement(cfg);
  }
  throw ConfigError("unknown experiment");
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot write {}", (dir / name).string()));
    f << text;
  };
  for (const Table& t : report.tables) write(t.name + ".csv", t.csv());
  write("summary.json", report.summary().dump(2) + "\n");
  const nlohmann::json embedded = embedded_config(report.config);
  std::string cfg;
  for (const auto& [key, value] : embedded.items()) {
    cfg += fmt::format("{} = {}\n", key, value.get<std::string>());
  }
  write("resolved.cfg", cfg);
}

}  // namespace lagvort
