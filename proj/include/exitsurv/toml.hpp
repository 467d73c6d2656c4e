#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "exitsurv/dates.hpp"

namespace exitsurv {

// Minimal TOML reader covering what the config files use: comments,
// [section] headers, [[section]] table arrays, and key = value with
// strings, integers, floats, booleans, local dates and flat arrays.
struct TomlValue {
  using Scalar = std::variant<std::string, std::int64_t, double, bool, Date>;
  Scalar scalar;
  std::vector<Scalar> array;
  bool is_array = false;
};

class TomlTable {
 public:
  std::map<std::string, TomlValue> values;              // "section.key"
  std::map<std::string, std::vector<TomlTable>> lists;  // [[name]] blocks

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Date get_date(const std::string& key, const Date& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;
};

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

}  // namespace exitsurv
