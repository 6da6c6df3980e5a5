#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lagvort {

// Line-oriented `key = value` settings with dotted keys and `#` comments. Every key has a
// default; unknown keys are rejected with a ConfigError naming the key.
class Config {
 public:
  Config();

  static Config parse(std::string_view text, std::string_view source = "<config>");
  // A .cfg file, or a summary.json whose "config" object is read back.
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  // "key=value".
  void apply_override(std::string_view assignment);

  static bool known(const std::string& key);
  static std::vector<std::string> keys();

  const std::string& raw(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  // Semicolon-separated groups of comma-separated numbers.
  std::vector<std::vector<double>> groups(const std::string& key) const;
  // "auto" for computed defaults.
  bool is_auto(const std::string& key) const;

  // Sorted `key = value` lines; parse(serialize()) reproduces the config.
  std::string serialize() const;
  nlohmann::json to_json() const;

  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lagvort
