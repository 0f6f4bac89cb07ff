// Flat key-value run configuration. Two on-disk forms parse to the
// same thing: `key = value` text (one pair per line, '#' comments) and
// a flat JSON object. Typed getters record which keys a consumer
// understands; anything left unread is rejected by name, so a typo in
// a config file fails loudly instead of silently using a default.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace mbd {

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  // Required getters throw naming the missing key; optional ones fall
  // back to the default. Either form marks the key as recognized.
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws naming the first key no getter ever asked about.
  void reject_unknown_keys() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::string require(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::string origin_;
  mutable std::set<std::string> recognized_;
};

}  // namespace mbd
