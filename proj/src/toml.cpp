#include "fairhpo/toml.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fairhpo/errors.hpp"

namespace fairhpo::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

void skip_ws(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

// Removes a trailing comment, honoring quotes. Returns false when the line
// ends inside an unbalanced array (caller joins the next line).
std::string strip_comment(std::string_view line, int lineno) {
  std::string out;
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_basic) {
      if (c == '\\' && i + 1 < line.size()) {
        out += c;
        out += line[++i];
        continue;
      }
      if (c == '"') in_basic = false;
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else {
      if (c == '#') break;
      if (c == '"') in_basic = true;
      if (c == '\'') in_literal = true;
    }
    out += c;
  }
  if (in_basic || in_literal) fail(lineno, "unterminated string");
  return out;
}

int array_depth_delta(std::string_view s) {
  int depth = 0;
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_basic) {
      if (c == '\\') ++i;
      else if (c == '"') in_basic = false;
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else {
      if (c == '"') in_basic = true;
      else if (c == '\'') in_literal = true;
      else if (c == '[') ++depth;
      else if (c == ']') --depth;
    }
  }
  return depth;
}

std::string parse_basic_string(std::string_view s, std::size_t& pos, int lineno) {
  std::string out;
  ++pos;  // opening quote
  while (pos < s.size() && s[pos] != '"') {
    char c = s[pos];
    if (c == '\\') {
      ++pos;
      if (pos >= s.size()) fail(lineno, "dangling escape in string");
      switch (s[pos]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(lineno, std::string("unsupported escape \\") + s[pos]);
      }
      ++pos;
    } else {
      out += c;
      ++pos;
    }
  }
  if (pos >= s.size()) fail(lineno, "unterminated string");
  ++pos;  // closing quote
  return out;
}

std::string parse_literal_string(std::string_view s, std::size_t& pos, int lineno) {
  std::string out;
  ++pos;
  while (pos < s.size() && s[pos] != '\'') out += s[pos++];
  if (pos >= s.size()) fail(lineno, "unterminated literal string");
  ++pos;
  return out;
}

Value parse_value(std::string_view s, std::size_t& pos, int lineno);

Value parse_array(std::string_view s, std::size_t& pos, int lineno) {
  Value v;
  v.kind = Value::Kind::Array;
  ++pos;  // '['
  for (;;) {
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return v;
    }
    if (pos >= s.size()) fail(lineno, "unterminated array");
    v.array_v.push_back(parse_value(s, pos, lineno));
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ',') {
      ++pos;
      continue;
    }
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return v;
    }
    fail(lineno, "expected ',' or ']' in array");
  }
}

Value parse_number(std::string_view s, std::size_t& pos, int lineno) {
  std::size_t start = pos;
  bool is_float = false;
  while (pos < s.size()) {
    char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '_') {
      ++pos;
    } else if (c == '.' || c == 'e' || c == 'E') {
      is_float = true;
      ++pos;
    } else {
      break;
    }
  }
  std::string text(s.substr(start, pos - start));
  std::erase(text, '_');
  if (text.empty()) fail(lineno, "expected a value");
  Value v;
  if (is_float) {
    v.kind = Value::Kind::Float;
    char* end = nullptr;
    v.float_v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) fail(lineno, "malformed number '" + text + "'");
  } else {
    v.kind = Value::Kind::Int;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v.int_v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      fail(lineno, "malformed integer '" + text + "'");
  }
  return v;
}

Value parse_value(std::string_view s, std::size_t& pos, int lineno) {
  skip_ws(s, pos);
  if (pos >= s.size()) fail(lineno, "missing value");
  char c = s[pos];
  if (c == '"') {
    Value v;
    v.kind = Value::Kind::String;
    v.str_v = parse_basic_string(s, pos, lineno);
    return v;
  }
  if (c == '\'') {
    Value v;
    v.kind = Value::Kind::String;
    v.str_v = parse_literal_string(s, pos, lineno);
    return v;
  }
  if (c == '[') return parse_array(s, pos, lineno);
  if (c == '{') fail(lineno, "inline tables are not supported");
  if (s.compare(pos, 4, "true") == 0) {
    pos += 4;
    Value v;
    v.kind = Value::Kind::Bool;
    v.bool_v = true;
    return v;
  }
  if (s.compare(pos, 5, "false") == 0) {
    pos += 5;
    Value v;
    v.kind = Value::Kind::Bool;
    v.bool_v = false;
    return v;
  }
  return parse_number(s, pos, lineno);
}

std::string parse_key(std::string_view s, std::size_t& pos, int lineno) {
  skip_ws(s, pos);
  if (pos < s.size() && (s[pos] == '"' || s[pos] == '\'')) {
    return s[pos] == '"' ? parse_basic_string(s, pos, lineno)
                         : parse_literal_string(s, pos, lineno);
  }
  std::size_t start = pos;
  while (pos < s.size() && is_bare_key_char(s[pos])) ++pos;
  if (pos == start) fail(lineno, "expected a key");
  return std::string(s.substr(start, pos - start));
}

std::vector<std::string> parse_header_path(std::string_view s, std::size_t& pos, int lineno) {
  std::vector<std::string> path;
  for (;;) {
    path.push_back(parse_key(s, pos, lineno));
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      continue;
    }
    return path;
  }
}

const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::Int: return "integer";
    case Value::Kind::Float: return "float";
    case Value::Kind::Bool: return "boolean";
    case Value::Kind::String: return "string";
    case Value::Kind::Array: return "array";
    case Value::Kind::Table: return "table";
    case Value::Kind::TableArray: return "array of tables";
  }
  return "?";
}

}  // namespace

const Value* Value::find(std::string_view key) const {
  for (const auto& [k, v] : table_v)
    if (k == key) return &v;
  return nullptr;
}

Value& Value::insert_table(const std::string& key) {
  for (auto& [k, v] : table_v)
    if (k == key) return v;
  table_v.emplace_back(key, Value{});
  table_v.back().second.kind = Kind::Table;
  return table_v.back().second;
}

Value parse(std::string_view text) {
  Value root;
  root.kind = Value::Kind::Table;
  Value* current = &root;

  std::size_t offset = 0;
  int lineno = 0;
  while (offset <= text.size()) {
    std::size_t nl = text.find('\n', offset);
    std::string_view raw = text.substr(offset, nl == std::string_view::npos ? text.size() - offset
                                                                            : nl - offset);
    offset = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

    std::string line = strip_comment(raw, lineno);
    // Join continuation lines of a multi-line array.
    int depth = array_depth_delta(line);
    while (depth > 0 && offset <= text.size()) {
      std::size_t nl2 = text.find('\n', offset);
      std::string_view raw2 = text.substr(
          offset, nl2 == std::string_view::npos ? text.size() - offset : nl2 - offset);
      offset = (nl2 == std::string_view::npos) ? text.size() + 1 : nl2 + 1;
      ++lineno;
      if (!raw2.empty() && raw2.back() == '\r') raw2.remove_suffix(1);
      std::string cont = strip_comment(raw2, lineno);
      line += ' ';
      line += cont;
      depth += array_depth_delta(cont);
    }
    if (depth > 0) fail(lineno, "unterminated array");

    std::size_t pos = 0;
    skip_ws(line, pos);
    if (pos >= line.size()) continue;

    if (line[pos] == '[') {
      const bool is_array = pos + 1 < line.size() && line[pos + 1] == '[';
      pos += is_array ? 2 : 1;
      auto path = parse_header_path(line, pos, lineno);
      skip_ws(line, pos);
      if (pos >= line.size() || line[pos] != ']') fail(lineno, "malformed table header");
      ++pos;
      if (is_array) {
        if (pos >= line.size() || line[pos] != ']') fail(lineno, "malformed table header");
        ++pos;
      }
      skip_ws(line, pos);
      if (pos != line.size()) fail(lineno, "trailing characters after table header");

      Value* node = &root;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        Value* child = const_cast<Value*>(node->find(path[i]));
        if (child == nullptr) {
          child = &node->insert_table(path[i]);
        }
        if (child->kind == Value::Kind::TableArray) {
          if (child->array_v.empty()) fail(lineno, "empty table array '" + path[i] + "'");
          child = &child->array_v.back();
        }
        if (child->kind != Value::Kind::Table)
          fail(lineno, "'" + path[i] + "' is not a table");
        node = child;
      }
      const std::string& leaf = path.back();
      Value* child = const_cast<Value*>(node->find(leaf));
      if (is_array) {
        if (child == nullptr) {
          node->table_v.emplace_back(leaf, Value{});
          child = &node->table_v.back().second;
          child->kind = Value::Kind::TableArray;
        }
        if (child->kind != Value::Kind::TableArray)
          fail(lineno, "'" + leaf + "' redefined as array of tables");
        Value entry;
        entry.kind = Value::Kind::Table;
        child->array_v.push_back(std::move(entry));
        current = &child->array_v.back();
      } else {
        if (child == nullptr) child = &node->insert_table(leaf);
        if (child->kind != Value::Kind::Table) fail(lineno, "'" + leaf + "' is not a table");
        current = child;
      }
      continue;
    }

    std::string key = parse_key(line, pos, lineno);
    skip_ws(line, pos);
    if (pos >= line.size() || line[pos] != '=') fail(lineno, "expected '=' after key '" + key + "'");
    ++pos;
    Value value = parse_value(line, pos, lineno);
    skip_ws(line, pos);
    if (pos != line.size()) fail(lineno, "trailing characters after value for '" + key + "'");
    if (current->find(key) != nullptr) fail(lineno, "duplicate key '" + key + "'");
    current->table_v.emplace_back(std::move(key), std::move(value));
  }
  return root;
}

Value parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const Value& require(const Value& table, std::string_view key, std::string_view where) {
  const Value* v = table.find(key);
  if (v == nullptr)
    throw ConfigError("[" + std::string(where) + "] missing required key '" + std::string(key) + "'");
  return *v;
}

namespace {
[[noreturn]] void type_fail(std::string_view key, std::string_view where, Value::Kind got,
                            const char* want) {
  throw ConfigError("[" + std::string(where) + "] key '" + std::string(key) + "' must be " + want +
                    ", got " + kind_name(got));
}
}  // namespace

std::string get_string(const Value& table, std::string_view key, std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::String) type_fail(key, where, v.kind, "a string");
  return v.str_v;
}

std::int64_t get_int(const Value& table, std::string_view key, std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::Int) type_fail(key, where, v.kind, "an integer");
  return v.int_v;
}

double get_double(const Value& table, std::string_view key, std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind == Value::Kind::Int) return static_cast<double>(v.int_v);
  if (v.kind != Value::Kind::Float) type_fail(key, where, v.kind, "a number");
  return v.float_v;
}

bool get_bool(const Value& table, std::string_view key, std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::Bool) type_fail(key, where, v.kind, "a boolean");
  return v.bool_v;
}

std::string get_string_or(const Value& table, std::string_view key, std::string def) {
  const Value* v = table.find(key);
  return v == nullptr ? def : get_string(table, key, "?");
}

std::int64_t get_int_or(const Value& table, std::string_view key, std::int64_t def) {
  const Value* v = table.find(key);
  return v == nullptr ? def : get_int(table, key, "?");
}

double get_double_or(const Value& table, std::string_view key, double def) {
  const Value* v = table.find(key);
  return v == nullptr ? def : get_double(table, key, "?");
}

bool get_bool_or(const Value& table, std::string_view key, bool def) {
  const Value* v = table.find(key);
  return v == nullptr ? def : get_bool(table, key, "?");
}

std::vector<std::string> get_string_array(const Value& table, std::string_view key,
                                          std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::Array) type_fail(key, where, v.kind, "an array");
  std::vector<std::string> out;
  for (const auto& item : v.array_v) {
    if (item.kind != Value::Kind::String) type_fail(key, where, item.kind, "an array of strings");
    out.push_back(item.str_v);
  }
  return out;
}

std::vector<double> get_double_array(const Value& table, std::string_view key,
                                     std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::Array) type_fail(key, where, v.kind, "an array");
  std::vector<double> out;
  for (const auto& item : v.array_v) {
    if (item.kind == Value::Kind::Int) out.push_back(static_cast<double>(item.int_v));
    else if (item.kind == Value::Kind::Float) out.push_back(item.float_v);
    else type_fail(key, where, item.kind, "an array of numbers");
  }
  return out;
}

std::vector<std::int64_t> get_int_array(const Value& table, std::string_view key,
                                        std::string_view where) {
  const Value& v = require(table, key, where);
  if (v.kind != Value::Kind::Array) type_fail(key, where, v.kind, "an array");
  std::vector<std::int64_t> out;
  for (const auto& item : v.array_v) {
    if (item.kind != Value::Kind::Int) type_fail(key, where, item.kind, "an array of integers");
    out.push_back(item.int_v);
  }
  return out;
}

}  // namespace fairhpo::toml
