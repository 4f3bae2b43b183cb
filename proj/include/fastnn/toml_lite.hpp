#ifndef FASTNN_TOML_LITE_HPP
#define FASTNN_TOML_LITE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fastnn {

// The slice of TOML the run configs use: [table.subtable] headers, scalar
// keys (strings, integers, floats, booleans) and flat scalar arrays, with
// '#' comments. No inline tables, no multiline strings, no dates.
struct TomlValue {
  enum class Kind { string_v, int_v, float_v, bool_v, array_v };
  Kind kind = Kind::string_v;
  std::string s;
  long long i = 0;
  double d = 0.0;
  bool b = false;
  std::vector<TomlValue> items;

  // checked accessors; as_float accepts integer values too
  const std::string& as_string() const;
  long long as_int() const;
  double as_float() const;
  bool as_bool() const;
  const std::vector<TomlValue>& as_array() const;
};

TomlValue toml_string(std::string v);
TomlValue toml_int(long long v);
TomlValue toml_float(double v);
TomlValue toml_bool(bool v);
TomlValue toml_array(std::vector<TomlValue> items);

// Keys are flattened to dotted paths: [trainer] lr = 0.01 parses to
// "trainer.lr". Duplicate keys are rejected.
using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(const std::string& text,
                     const std::string& origin = "toml");

// Deterministic writer: root keys first, then tables in sorted order, keys
// sorted inside each. parse_toml(write_toml(t)) == t.
std::string write_toml(const TomlTable& table);

}  // namespace fastnn

#endif
