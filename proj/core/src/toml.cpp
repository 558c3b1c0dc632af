#include "nstlab/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "nstlab/error.hpp"

namespace nst::toml {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Parse, "toml: " + what + " at line " + std::to_string(line));
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  std::size_t line;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  void skip_ws() {
    while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
};

Value parse_value(Cursor& cur);

Value parse_scalar(Cursor& cur) {
  cur.skip_ws();
  if (cur.done()) fail(cur.line, "missing value");
  Value v;
  v.line = cur.line;
  char c = cur.peek();
  if (c == '"') {
    ++cur.pos;
    std::string out;
    while (!cur.done() && cur.peek() != '"') {
      char ch = cur.s[cur.pos++];
      if (ch == '\\') {
        if (cur.done()) fail(cur.line, "dangling escape");
        char esc = cur.s[cur.pos++];
        switch (esc) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(cur.line, std::string("unsupported escape \\") + esc);
        }
      } else {
        out.push_back(ch);
      }
    }
    if (cur.done()) fail(cur.line, "unterminated string");
    ++cur.pos;
    v.data = out;
    return v;
  }
  if (cur.s.compare(cur.pos, 4, "true") == 0) {
    cur.pos += 4;
    v.data = true;
    return v;
  }
  if (cur.s.compare(cur.pos, 5, "false") == 0) {
    cur.pos += 5;
    v.data = false;
    return v;
  }
  // number: integer unless it contains '.', 'e', or 'E'
  std::size_t start = cur.pos;
  while (!cur.done() && (std::isdigit(static_cast<unsigned char>(cur.peek())) || cur.peek() == '+' ||
                         cur.peek() == '-' || cur.peek() == '.' || cur.peek() == 'e' ||
                         cur.peek() == 'E')) {
    ++cur.pos;
  }
  if (cur.pos == start) fail(cur.line, "expected a value");
  std::string token = cur.s.substr(start, cur.pos - start);
  bool is_float = token.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      double d = std::stod(token, &used);
      if (used != token.size()) fail(cur.line, "malformed number \"" + token + "\"");
      v.data = d;
    } else {
      std::int64_t i = std::stoll(token, &used);
      if (used != token.size()) fail(cur.line, "malformed number \"" + token + "\"");
      v.data = i;
    }
  } catch (const std::exception&) {
    fail(cur.line, "malformed number \"" + token + "\"");
  }
  return v;
}

Value parse_value(Cursor& cur) {
  cur.skip_ws();
  if (!cur.done() && cur.peek() == '[') {
    Value v;
    v.line = cur.line;
    std::vector<Value> items;
    ++cur.pos;
    cur.skip_ws();
    if (!cur.done() && cur.peek() == ']') {
      ++cur.pos;
      v.data = std::move(items);
      return v;
    }
    for (;;) {
      items.push_back(parse_scalar(cur));
      cur.skip_ws();
      if (cur.done()) fail(cur.line, "unterminated array");
      if (cur.peek() == ',') {
        ++cur.pos;
        cur.skip_ws();
        continue;
      }
      if (cur.peek() == ']') {
        ++cur.pos;
        break;
      }
      fail(cur.line, "expected ',' or ']' in array");
    }
    v.data = std::move(items);
    return v;
  }
  return parse_scalar(cur);
}

}  // namespace

const std::string& Value::as_string() const {
  if (!is_string()) throw Error(ErrorKind::Config, "toml: expected a string at line " + std::to_string(line));
  return std::get<std::string>(data);
}

std::int64_t Value::as_int() const {
  if (!is_int()) throw Error(ErrorKind::Config, "toml: expected an integer at line " + std::to_string(line));
  return std::get<std::int64_t>(data);
}

double Value::as_float() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data));
  if (!is_float()) throw Error(ErrorKind::Config, "toml: expected a number at line " + std::to_string(line));
  return std::get<double>(data);
}

bool Value::as_bool() const {
  if (!is_bool()) throw Error(ErrorKind::Config, "toml: expected a boolean at line " + std::to_string(line));
  return std::get<bool>(data);
}

const std::vector<Value>& Value::as_array() const {
  if (!is_array()) throw Error(ErrorKind::Config, "toml: expected an array at line " + std::to_string(line));
  return std::get<std::vector<Value>>(data);
}

Table parse(const std::string& text) {
  Table table;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    Cursor cur{raw, 0, line_no};
    cur.skip_ws();
    if (cur.done() || cur.peek() == '#') continue;

    if (cur.peek() == '[') {
      ++cur.pos;
      std::size_t start = cur.pos;
      while (!cur.done() && is_bare_key_char(cur.peek())) ++cur.pos;
      if (cur.pos == start || cur.done() || cur.peek() != ']') {
        fail(line_no, "malformed section header");
      }
      section = raw.substr(start, cur.pos - start);
      ++cur.pos;
      cur.skip_ws();
      if (!cur.done() && cur.peek() != '#') fail(line_no, "trailing content after section header");
      if (table.contains(section)) fail(line_no, "duplicate section [" + section + "]");
      table[section];  // materialize even if empty
      continue;
    }

    std::size_t start = cur.pos;
    while (!cur.done() && is_bare_key_char(cur.peek())) ++cur.pos;
    if (cur.pos == start) fail(line_no, "expected a key");
    std::string key = raw.substr(start, cur.pos - start);
    cur.skip_ws();
    if (cur.done() || cur.peek() != '=') fail(line_no, "expected '=' after key \"" + key + "\"");
    ++cur.pos;
    Value value = parse_value(cur);
    cur.skip_ws();
    if (!cur.done() && cur.peek() != '#') fail(line_no, "trailing content after value");
    auto& sect = table[section];
    if (sect.contains(key)) fail(line_no, "duplicate key \"" + key + "\"");
    sect.emplace(std::move(key), std::move(value));
  }
  return table;
}

Table parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "toml: cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse(buf.str());
}

std::string encode_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace nst::toml
