#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace greenlight {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key=value scenario configuration. '#' lines are comments; CLI flags
/// override file values through set(). Unknown and duplicate keys are
/// rejected with their line numbers.
class KeyValueConfig {
 public:
  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // channel
        "link_loss_db", "detector_efficiency", "y0", "e_d", "f_e", "e_0",
        // operating point and sweep grids
        "total_loss_db", "total_loss_min_db", "total_loss_max_db",
        "total_loss_step_db", "delta_loss_db", "delta_loss_min_db",
        "delta_loss_max_db", "delta_loss_step_db",
        // optimizer
        "mu_min", "mu_max", "nu1_min", "nu1_max", "coarse_grid",
        "refine_iterations", "refine_shrink",
        // modulator data
        "data", "sample",
        // defenses
        "isolator_db", "filter_db", "monitor_threshold_uW",
        "monitor_noise_floor_uW", "monitor_position", "injected_min_uW",
        "injected_max_uW", "injected_step_uW", "security_budget_db",
        "model_delta_loss_max_db", "model_p0_uW",
        // output
        "out", "workers"};
    return keys;
  }

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value, got '" + t + "'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (!known_keys().count(key))
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
      if (cfg.values_.count(key))
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
      if (value.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty value for '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key))
      throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  int get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const int v = std::stoi(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not an integer: '" + it->second +
                        "'");
    }
  }

  /// Comma-separated list of doubles.
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty())
      throw ConfigError("config key '" + key + "': empty list");
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& value) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace greenlight
