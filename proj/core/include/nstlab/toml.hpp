#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace nst::toml {

/// Minimal strict TOML subset: single-level [section] tables, bare keys,
/// values of type string / integer / float / boolean / flat array. Enough for
/// the experiment configs; anything else is a parse error with a line number.
struct Value {
  std::variant<std::string, std::int64_t, double, bool, std::vector<Value>> data;
  std::size_t line = 0;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }

  const std::string& as_string() const;
  std::int64_t as_int() const;
  double as_float() const;  // accepts integers too
  bool as_bool() const;
  const std::vector<Value>& as_array() const;
};

/// section -> key -> value; top-level keys live under section "".
using Table = std::map<std::string, std::map<std::string, Value>>;

Table parse(const std::string& text);
Table parse_file(const std::filesystem::path& path);

std::string encode_string(const std::string& s);

}  // namespace nst::toml
