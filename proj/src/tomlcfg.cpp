#include "fraclab/tomlcfg.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fraclab {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    b++;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    e--;
  }
  return s.substr(b, e - b);
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') {
      in_str = !in_str;
    } else if (s[i] == '#' && !in_str) {
      return s.substr(0, i);
    }
  }
  return s;
}

std::vector<std::string> split_array(const std::string& body, int line_no) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') {
      in_str = !in_str;
      cur += c;
    } else if (c == ',' && !in_str) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty()) {
    parts.push_back(last);
  }
  if (in_str) {
    throw ConfigError("config line " + std::to_string(line_no) +
                      ": unterminated string in array");
  }
  return parts;
}

}  // namespace

TomlConfig TomlConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

TomlConfig TomlConfig::parse_string(const std::string& text) {
  TomlConfig cfg;
  cfg.raw_ = text;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    line = trim(strip_comment(line));
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty section name");
      }
      cfg.sections_[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key or value");
    }
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool TomlConfig::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

const std::string& TomlConfig::lookup(const std::string& section,
                                      const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) {
    throw ConfigError("config: missing section [" + section + "]");
  }
  auto k = s->second.find(key);
  if (k == s->second.end()) {
    throw ConfigError("config: missing key '" + key + "' in [" + section + "]");
  }
  return k->second;
}

std::string TomlConfig::get_string(const std::string& section,
                                   const std::string& key) const {
  const std::string& v = lookup(section, key);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return v.substr(1, v.size() - 2);
  }
  throw ConfigError("config: key '" + key + "' in [" + section +
                    "] is not a quoted string");
}

int64_t TomlConfig::get_int(const std::string& section,
                            const std::string& key) const {
  const std::string& v = lookup(section, key);
  int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' in [" + section +
                      "] is not an integer: " + v);
  }
  return out;
}

double TomlConfig::get_double(const std::string& section,
                              const std::string& key) const {
  const std::string& v = lookup(section, key);
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' in [" + section +
                      "] is not a number: " + v);
  }
}

bool TomlConfig::get_bool(const std::string& section,
                          const std::string& key) const {
  const std::string& v = lookup(section, key);
  if (v == "true") {
    return true;
  }
  if (v == "false") {
    return false;
  }
  throw ConfigError("config: key '" + key + "' in [" + section +
                    "] is not a boolean: " + v);
}

std::vector<int64_t> TomlConfig::get_int_array(const std::string& section,
                                               const std::string& key) const {
  const std::string& v = lookup(section, key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ConfigError("config: key '" + key + "' in [" + section +
                      "] is not an array");
  }
  std::vector<int64_t> out;
  for (const std::string& part : split_array(v.substr(1, v.size() - 2), 0)) {
    int64_t x = 0;
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
    if (ec != std::errc() || p != part.data() + part.size()) {
      throw ConfigError("config: array element '" + part + "' in key '" + key +
                        "' is not an integer");
    }
    out.push_back(x);
  }
  return out;
}

std::vector<double> TomlConfig::get_double_array(const std::string& section,
                                                 const std::string& key) const {
  const std::string& v = lookup(section, key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ConfigError("config: key '" + key + "' in [" + section +
                      "] is not an array");
  }
  std::vector<double> out;
  for (const std::string& part : split_array(v.substr(1, v.size() - 2), 0)) {
    try {
      size_t pos = 0;
      const double x = std::stod(part, &pos);
      if (pos != part.size()) {
        throw std::invalid_argument(part);
      }
      out.push_back(x);
    } catch (const std::exception&) {
      throw ConfigError("config: array element '" + part + "' in key '" + key +
                        "' is not a number");
    }
  }
  return out;
}

std::string TomlConfig::get_string_or(const std::string& s, const std::string& k,
                                      const std::string& dflt) const {
  return has(s, k) ? get_string(s, k) : dflt;
}
int64_t TomlConfig::get_int_or(const std::string& s, const std::string& k,
                               int64_t dflt) const {
  return has(s, k) ? get_int(s, k) : dflt;
}
double TomlConfig::get_double_or(const std::string& s, const std::string& k,
                                 double dflt) const {
  return has(s, k) ? get_double(s, k) : dflt;
}
bool TomlConfig::get_bool_or(const std::string& s, const std::string& k,
                             bool dflt) const {
  return has(s, k) ? get_bool(s, k) : dflt;
}

}  // namespace fraclab
