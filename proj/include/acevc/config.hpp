#pragma once

// Flat `key = value` configuration with [section] headers. Keys are stored
// fully qualified ("sre.width"). Every known key has a default; parsing a
// file overlays it onto the defaults and rejects unknown keys.

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace acevc {

class Config {
 public:
  /// All known keys with their default values.
  static Config defaults();

  /// Parses text over the defaults. Errors carry `origin:line`.
  static Config parse(std::string_view text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  /// Overrides a known key; throws for unknown keys.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// Canonical text: sections in key order, one `name = value` per line.
  /// Re-parsing it yields the same Config.
  std::string to_text() const;

  /// Canonical text restricted to the given sections, used for fingerprints.
  std::string section_text(const std::vector<std::string>& sections) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace acevc
