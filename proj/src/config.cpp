#include "mbdrop/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mbdrop/errors.hpp"

namespace mbd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    throw IoError("config: cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_string(buffer.str(), path);
}

Config Config::parse_string(const std::string& text,
                            const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;

  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: " + origin +
                                  " is not valid JSON: " + e.what());
    }
    if (!root.is_object()) {
      throw std::invalid_argument("config: " + origin +
                                  " must be a flat JSON object");
    }
    for (const auto& [key, value] : root.items()) {
      std::string repr;
      if (value.is_string()) {
        repr = value.get<std::string>();
      } else if (value.is_boolean() || value.is_number()) {
        repr = value.dump();
      } else {
        throw std::invalid_argument("config: key '" + key + "' in " + origin +
                                    " must be a string, number, or bool");
      }
      cfg.values_[key] = repr;
    }
    return cfg;
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + origin + " line " +
                                  std::to_string(lineno) +
                                  " is not 'key = value': '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config: " + origin + " line " +
                                  std::to_string(lineno) + " has an empty key");
    }
    if (cfg.values_.count(key)) {
      throw std::invalid_argument("config: duplicate key '" + key + "' in " +
                                  origin);
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  recognized_.insert(key);
  return values_.count(key) != 0;
}

std::string Config::require(const std::string& key) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("config: missing required key '" + key +
                                "' in " + origin_);
  }
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  return require(key);
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has value '" + raw +
                                "', expected a number");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  try {
    // stoull would silently wrap a negative value around
    if (!raw.empty() && raw.front() == '-') throw std::invalid_argument(raw);
    std::size_t used = 0;
    const unsigned long long v = std::stoull(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has value '" + raw +
                                "', expected a non-negative integer");
  }
}

}  // namespace

double Config::get_double(const std::string& key) const {
  return parse_double(key, require(key));
}

double Config::get_double(const std::string& key, double fallback) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(parse_u64(key, require(key)));
}

std::size_t Config::get_size(const std::string& key,
                             std::size_t fallback) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end()
             ? fallback
             : static_cast<std::size_t>(parse_u64(key, it->second));
}

std::uint64_t Config::get_u64(const std::string& key) const {
  return parse_u64(key, require(key));
}

std::uint64_t Config::get_u64(const std::string& key,
                              std::uint64_t fallback) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_u64(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  recognized_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& raw = it->second;
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' has value '" + raw +
                              "', expected a boolean");
}

void Config::reject_unknown_keys() const {
  for (const auto& [key, value] : values_) {
    if (!recognized_.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  origin_);
    }
  }
}

}  // namespace mbd
