#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

// Minimal TOML-subset reader: [section] headers, key = value pairs, scalar
// values (string, integer, float, boolean) and flat arrays of scalars, with
// '#' comments. That is all the config schema uses; anything else is a
// ConfigError naming the line.
class TomlConfig {
 public:
  static TomlConfig parse_file(const std::string& path);
  static TomlConfig parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  int64_t get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<int64_t> get_int_array(const std::string& section,
                                     const std::string& key) const;
  std::vector<double> get_double_array(const std::string& section,
                                       const std::string& key) const;

  std::string get_string_or(const std::string& s, const std::string& k,
                            const std::string& dflt) const;
  int64_t get_int_or(const std::string& s, const std::string& k, int64_t dflt) const;
  double get_double_or(const std::string& s, const std::string& k, double dflt) const;
  bool get_bool_or(const std::string& s, const std::string& k, bool dflt) const;

  const std::string& raw_text() const { return raw_; }

 private:
  const std::string& lookup(const std::string& section,
                            const std::string& key) const;
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string raw_;
};

}  // namespace fraclab
