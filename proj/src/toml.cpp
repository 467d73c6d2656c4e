#include "exitsurv/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace exitsurv {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

TomlValue::Scalar parse_scalar(const std::string& raw, int line_no) {
  std::string s = trim(raw);
  if (s.empty())
    throw std::runtime_error("toml: empty value at line " + std::to_string(line_no));
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw std::runtime_error("toml: unterminated string at line " + std::to_string(line_no));
    std::string out;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        ++i;
        switch (s[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: out += s[i];
        }
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  Date d;
  if (try_parse_date(s, d)) return d;
  // Integer if it parses completely as one, float otherwise.
  try {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos == s.size()) return static_cast<std::int64_t>(v);
  } catch (...) {
  }
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (...) {
  }
  throw std::runtime_error("toml: cannot parse value '" + s + "' at line " +
                           std::to_string(line_no));
}

std::vector<std::string> split_array_items(const std::string& body) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(cur);
  return items;
}

}  // namespace

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (auto* p = std::get_if<std::string>(&it->second.scalar)) return *p;
  throw std::runtime_error("toml: '" + key + "' is not a string");
}

std::int64_t TomlTable::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (auto* p = std::get_if<std::int64_t>(&it->second.scalar)) return *p;
  throw std::runtime_error("toml: '" + key + "' is not an integer");
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (auto* p = std::get_if<double>(&it->second.scalar)) return *p;
  if (auto* p = std::get_if<std::int64_t>(&it->second.scalar))
    return static_cast<double>(*p);
  throw std::runtime_error("toml: '" + key + "' is not a number");
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (auto* p = std::get_if<bool>(&it->second.scalar)) return *p;
  throw std::runtime_error("toml: '" + key + "' is not a boolean");
}

Date TomlTable::get_date(const std::string& key, const Date& fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (auto* p = std::get_if<Date>(&it->second.scalar)) return *p;
  if (auto* p = std::get_if<std::string>(&it->second.scalar)) return parse_date(*p);
  throw std::runtime_error("toml: '" + key + "' is not a date");
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key) const {
  std::vector<std::string> out;
  auto it = values.find(key);
  if (it == values.end()) return out;
  if (!it->second.is_array)
    throw std::runtime_error("toml: '" + key + "' is not an array");
  for (const auto& s : it->second.array) {
    if (auto* p = std::get_if<std::string>(&s)) out.push_back(*p);
    else throw std::runtime_error("toml: '" + key + "' has non-string items");
  }
  return out;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
  std::vector<double> out;
  auto it = values.find(key);
  if (it == values.end()) return out;
  if (!it->second.is_array)
    throw std::runtime_error("toml: '" + key + "' is not an array");
  for (const auto& s : it->second.array) {
    if (auto* p = std::get_if<double>(&s)) out.push_back(*p);
    else if (auto* q = std::get_if<std::int64_t>(&s)) out.push_back(static_cast<double>(*q));
    else throw std::runtime_error("toml: '" + key + "' has non-numeric items");
  }
  return out;
}

TomlTable parse_toml(const std::string& text) {
  TomlTable root;
  TomlTable* target = &root;
  std::string prefix;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;

    if (s.size() >= 4 && s.substr(0, 2) == "[[" && s.substr(s.size() - 2) == "]]") {
      std::string name = trim(s.substr(2, s.size() - 4));
      root.lists[name].emplace_back();
      target = &root.lists[name].back();
      prefix.clear();
      continue;
    }
    if (s.front() == '[' && s.back() == ']') {
      prefix = trim(s.substr(1, s.size() - 2));
      target = &root;
      continue;
    }

    size_t eq = std::string::npos;
    bool in_string = false;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_string = !in_string;
      if (s[i] == '=' && !in_string) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      throw std::runtime_error("toml: expected key = value at line " +
                               std::to_string(line_no));
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("toml: empty key at line " + std::to_string(line_no));
    if (!prefix.empty()) key = prefix + "." + key;

    TomlValue v;
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']')
        throw std::runtime_error("toml: unterminated array at line " +
                                 std::to_string(line_no));
      v.is_array = true;
      for (const auto& item : split_array_items(value.substr(1, value.size() - 2)))
        v.array.push_back(parse_scalar(item, line_no));
    } else {
      v.scalar = parse_scalar(value, line_no);
    }
    target->values[key] = std::move(v);
  }
  return root;
}

TomlTable parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

}  // namespace exitsurv
