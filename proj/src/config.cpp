#include "lagvort/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lagvort/errors.hpp"

namespace lagvort {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"experiment", "simulate"},
      {"domain.kind", "disk"},
      {"domain.radius", "1"},
      {"vorticity.base", R"({"kind": "disk_patch", "center": [0.35, 0.1], "radius": 0.3, "amplitude": 1})"},
      {"vorticity.second", "none"},
      {"family.kind", "offset"},
      {"family.offsets", "0.1,0.01,0.001"},
      {"family.direction", "1,0"},
      {"family.amplitude", "0.5"},
      {"family.frequencies", "4,8,16,32"},
      {"family.axis", "0"},
      {"numerics.T", "1"},
      {"numerics.dt", "0.01"},
      {"numerics.h", "0.009375"},
      {"numerics.delta", "auto"},
      {"numerics.grid_ratio", "2"},
      {"numerics.strategy", "direct"},
      {"numerics.theta", "0.5"},
      {"numerics.order", "8"},
      {"metrics.p", "1"},
      {"metrics.time_stride", "1"},
      {"metrics.test_functions", "0.35,0.1,0.15; 0.45,0.2,0.1; 0.25,0,0.25"},
      {"kernel.samples", "16"},
      {"kernel.resolution", "32"},
      {"kernel.min_separation", "0.001"},
      {"kernel.seed", "20240611"},
      {"kernel.radius", "1"},
      {"stability.offset", "0.001"},
      {"stability.times", "-1,-0.5,0,0.5,1"},
      {"stability.eta_spacing", "0.03125"},
      {"stability.lp", "true"},
      {"lp.min_slope", "0.3"},
      {"weakstar.times", "0.5,1"},
      {"weakstar.gap_ratio", "2"},
      {"weakstar.strong_ratio", "0.5"},
      {"time.times", "0,0.25,0.5"},
      {"time.lags", "1,2,4,8"},
      {"weakform.window", "0,1"},
      {"weakform.test_function", "0.4,0.1,0.2"},
      {"weakform.tolerance", "0.01"},
      {"holder.times", "0.5,1,2"},
      {"holder.pairs", "2000"},
      {"holder.s_min", "auto"},
      {"holder.octaves", "4"},
      {"holder.seed", "11"},
      {"refine.parameter", "dt"},
      {"refine.factors", "1,2"},
      {"refine.lp", "true"},
      {"simulate.export", "true"},
      {"output.dir", "out"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside a JSON string.
std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace

Config::Config() : values_(defaults()) {}

bool Config::known(const std::string& key) { return defaults().count(key) != 0; }

std::vector<std::string> Config::keys() {
  std::vector<std::string> k;
  for (const auto& [key, value] : defaults()) k.push_back(key);
  return k;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  values_[key] = trim(value);
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

Config Config::parse(std::string_view text, std::string_view source) {
  Config cfg;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, lineno));
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, lineno));
    if (!known(key)) throw ConfigError(fmt::format("{}:{}: unknown config key '{}'", source, lineno, key));
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(fmt::format("{}:{}: key '{}' already set on line {}", source, lineno, key, it->second));
    }
    seen[key] = lineno;
    cfg.set(key, body.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw ConfigError(fmt::format("{}: no embedded \"config\" object", path.string()));
    }
    Config cfg;
    for (const auto& [key, value] : j["config"].items()) {
      if (!value.is_string()) throw ConfigError(fmt::format("{}: config value of '{}' is not a string", path.string(), key));
      cfg.set(key, value.get<std::string>());
    }
    return cfg;
  }
  return parse(ss.str(), path.string());
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
  return it->second;
}

bool Config::is_auto(const std::string& key) const { return raw(key) == "auto"; }

double Config::number(const std::string& key) const { return parse_number(key, raw(key)); }

int Config::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, raw(key)));
  return static_cast<int>(v);
}

bool Config::boolean(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  if (trim(raw(key)).empty()) return out;
  for (const auto& item : split(raw(key), ',')) out.push_back(parse_number(key, item));
  return out;
}

std::vector<int> Config::integers(const std::string& key) const {
  std::vector<int> out;
  for (double v : numbers(key)) {
    if (v != std::floor(v)) throw ConfigError(fmt::format("{}: '{}' is not a list of integers", key, raw(key)));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::vector<double>> Config::groups(const std::string& key) const {
  std::vector<std::vector<double>> out;
  for (const auto& g : split(raw(key), ';')) {
    std::vector<double> row;
    for (const auto& item : split(g, ',')) row.push_back(parse_number(key, item));
    out.push_back(std::move(row));
  }
  return out;
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [key, value] : values_) out += fmt::format("{} = {}\n", key, value);
  return out;
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : values_) j[key] = value;
  return j;
}

}  // namespace lagvort
