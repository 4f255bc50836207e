#pragma once

#include "semiclassical/types.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace semiclassical {

// Flat `key: value` configuration (YAML subset: scalars and flow lists of scalars only).
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::set<std::string>& allowed) {
    YAML::Node root;
    try {
      root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    Config c;
    if (root.IsNull()) return c;
    if (!root.IsMap()) throw ConfigError("config: expected a flat key/value mapping");
    for (const auto& kv : root) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "'");
      const YAML::Node& v = kv.second;
      std::vector<std::string> items;
      if (v.IsScalar()) {
        items.push_back(v.as<std::string>());
      } else if (v.IsSequence()) {
        for (const auto& e : v) {
          if (!e.IsScalar()) throw ConfigError("config: '" + key + "' must be a scalar list");
          items.push_back(e.as<std::string>());
        }
      } else {
        throw ConfigError("config: '" + key + "' must be a scalar or a list of scalars");
      }
      if (c.values_.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
      c.values_[key] = items;
    }
    return c;
  }

  static Config load(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), allowed);
  }

  bool has(const std::string& k) const { return values_.count(k) > 0; }
  void set(const std::string& k, const std::string& v) { values_[k] = {v}; }

  std::string str(const std::string& k, const std::string& def) const { return has(k) ? scalar(k) : def; }
  std::string str(const std::string& k) const {
    require(k);
    return scalar(k);
  }
  double num(const std::string& k, double def) const { return has(k) ? to_num(k, scalar(k)) : def; }
  double num(const std::string& k) const {
    require(k);
    return to_num(k, scalar(k));
  }
  int integer(const std::string& k, int def) const {
    const double v = num(k, def);
    if (v != std::floor(v)) throw ConfigError("config: '" + k + "' must be an integer");
    return static_cast<int>(v);
  }
  std::vector<double> nums(const std::string& k) const {
    require(k);
    std::vector<double> out;
    for (const auto& s : values_.at(k)) out.push_back(to_num(k, s));
    return out;
  }
  std::vector<double> nums(const std::string& k, const std::vector<double>& def) const {
    return has(k) ? nums(k) : def;
  }
  std::vector<std::string> strs(const std::string& k, const std::vector<std::string>& def) const {
    return has(k) ? values_.at(k) : def;
  }

  // Canonical text (sorted keys) and its hash; identical configs hash identically.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      out += k + "=";
      for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
      out += "\n";
    }
    return out;
  }
  std::string hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(canonical()));
    return buf;
  }

 private:
  std::map<std::string, std::vector<std::string>> values_;

  void require(const std::string& k) const {
    if (!has(k)) throw ConfigError("config: missing required key '" + k + "'");
  }
  std::string scalar(const std::string& k) const {
    const auto& v = values_.at(k);
    if (v.size() != 1) throw ConfigError("config: '" + k + "' must be a single value");
    return v[0];
  }
  static double to_num(const std::string& k, const std::string& s) {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + k + "' expects a number, got '" + s + "'");
    }
  }
};

}  // namespace semiclassical
