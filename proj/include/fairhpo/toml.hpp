#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairhpo::toml {

// Minimal TOML subset parser covering what experiment configs use:
// [table] and [[array-of-table]] headers (dotted paths allowed), key = value
// pairs with basic/literal strings, integers, floats, booleans, and
// (possibly multi-line) arrays. Dates, inline tables and dotted keys are not
// supported and raise ConfigError with the offending line number.

class Value {
 public:
  enum class Kind { Int, Float, Bool, String, Array, Table, TableArray };

  Kind kind = Kind::Table;
  std::int64_t int_v = 0;
  double float_v = 0.0;
  bool bool_v = false;
  std::string str_v;
  std::vector<Value> array_v;                            // Kind::Array / Kind::TableArray
  std::vector<std::pair<std::string, Value>> table_v;    // Kind::Table

  bool is_table() const { return kind == Kind::Table; }

  const Value* find(std::string_view key) const;
  Value& insert_table(const std::string& key);           // find-or-create child table
};

Value parse(std::string_view text);
Value parse_file(const std::string& path);

// Typed accessors. `where` names the enclosing section for error messages
// ("tuner", "dataset", ...).
const Value& require(const Value& table, std::string_view key, std::string_view where);
std::string get_string(const Value& table, std::string_view key, std::string_view where);
std::int64_t get_int(const Value& table, std::string_view key, std::string_view where);
double get_double(const Value& table, std::string_view key, std::string_view where);
bool get_bool(const Value& table, std::string_view key, std::string_view where);

std::string get_string_or(const Value& table, std::string_view key, std::string def);
std::int64_t get_int_or(const Value& table, std::string_view key, std::int64_t def);
double get_double_or(const Value& table, std::string_view key, double def);
bool get_bool_or(const Value& table, std::string_view key, bool def);

std::vector<std::string> get_string_array(const Value& table, std::string_view key,
                                          std::string_view where);
std::vector<double> get_double_array(const Value& table, std::string_view key,
                                     std::string_view where);
std::vector<std::int64_t> get_int_array(const Value& table, std::string_view key,
                                        std::string_view where);

}  // namespace fairhpo::toml
