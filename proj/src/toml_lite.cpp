#include "fastnn/toml_lite.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "fastnn/bench.hpp"

namespace fastnn {

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// cut a '#' comment that is not inside a quoted string
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_bare_key(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

bool valid_table_path(const std::string& s) {
  if (s.empty()) return false;
  std::string part;
  for (char c : s + ".") {
    if (c == '.') {
      if (!valid_bare_key(part)) return false;
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  return true;
}

std::string parse_quoted(const std::string& raw, const std::string& where) {
  if (raw.size() < 2 || raw.back() != '"')
    throw std::invalid_argument(where + ": unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    const char c = raw[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (i + 2 >= raw.size())
      throw std::invalid_argument(where + ": dangling escape");
    const char e = raw[++i];
    switch (e) {
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      default:
        throw std::invalid_argument(where + ": unsupported escape '\\" +
                                    std::string(1, e) + "'");
    }
  }
  return out;
}

TomlValue parse_scalar(const std::string& raw, const std::string& where) {
  if (raw.empty()) throw std::invalid_argument(where + ": missing value");
  if (raw.front() == '"') return toml_string(parse_quoted(raw, where));
  if (raw == "true") return toml_bool(true);
  if (raw == "false") return toml_bool(false);

  char* end = nullptr;
  const long long as_i = std::strtoll(raw.c_str(), &end, 10);
  if (end == raw.c_str() + raw.size()) return toml_int(as_i);
  const double as_d = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() + raw.size()) {
    if (!std::isfinite(as_d))
      throw std::invalid_argument(where + ": non-finite number '" + raw + "'");
    return toml_float(as_d);
  }
  throw std::invalid_argument(where + ": cannot parse value '" + raw + "'");
}

TomlValue parse_value(const std::string& raw, const std::string& where) {
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']')
      throw std::invalid_argument(where + ": unterminated array");
    TomlValue arr = toml_array({});
    std::string body = raw.substr(1, raw.size() - 2);
    std::string cur;
    bool in_string = false;
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (in_string) {
        cur.push_back(c);
        if (c == '\\' && i + 1 < body.size()) cur.push_back(body[++i]);
        else if (c == '"') in_string = false;
      } else if (c == '"') {
        cur.push_back(c);
        in_string = true;
      } else if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else if (c == '[') {
        throw std::invalid_argument(where + ": nested arrays unsupported");
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    // tolerate one trailing comma
    if (!parts.empty() && trimmed(parts.back()).empty()) parts.pop_back();
    for (const std::string& part : parts) {
      const std::string t = trimmed(part);
      if (t.empty())
        throw std::invalid_argument(where + ": empty array element");
      arr.items.push_back(parse_scalar(t, where));
    }
    return arr;
  }
  return parse_scalar(raw, where);
}

}  // namespace

const std::string& TomlValue::as_string() const {
  if (kind != Kind::string_v)
    throw std::invalid_argument("value is not a string");
  return s;
}

long long TomlValue::as_int() const {
  if (kind != Kind::int_v)
    throw std::invalid_argument("value is not an integer");
  return i;
}

double TomlValue::as_float() const {
  if (kind == Kind::float_v) return d;
  if (kind == Kind::int_v) return static_cast<double>(i);
  throw std::invalid_argument("value is not a number");
}

bool TomlValue::as_bool() const {
  if (kind != Kind::bool_v)
    throw std::invalid_argument("value is not a boolean");
  return b;
}

const std::vector<TomlValue>& TomlValue::as_array() const {
  if (kind != Kind::array_v)
    throw std::invalid_argument("value is not an array");
  return items;
}

TomlValue toml_string(std::string v) {
  TomlValue t;
  t.kind = TomlValue::Kind::string_v;
  t.s = std::move(v);
  return t;
}

TomlValue toml_int(long long v) {
  TomlValue t;
  t.kind = TomlValue::Kind::int_v;
  t.i = v;
  return t;
}

TomlValue toml_float(double v) {
  TomlValue t;
  t.kind = TomlValue::Kind::float_v;
  t.d = v;
  return t;
}

TomlValue toml_bool(bool v) {
  TomlValue t;
  t.kind = TomlValue::Kind::bool_v;
  t.b = v;
  return t;
}

TomlValue toml_array(std::vector<TomlValue> items) {
  TomlValue t;
  t.kind = TomlValue::Kind::array_v;
  t.items = std::move(items);
  return t;
}

TomlTable parse_toml(const std::string& text, const std::string& origin) {
  TomlTable table;
  std::string prefix;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    std::string body = trimmed(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']')
        throw std::invalid_argument(where + ": unterminated table header");
      const std::string path = trimmed(body.substr(1, body.size() - 2));
      if (!valid_table_path(path))
        throw std::invalid_argument(where + ": bad table name '" + path +
                                    "'");
      prefix = path + ".";
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(where + ": expected key = value");
    const std::string key = trimmed(body.substr(0, eq));
    if (!valid_bare_key(key))
      throw std::invalid_argument(where + ": bad key '" + key + "'");
    const std::string full = prefix + key;
    if (table.count(full))
      throw std::invalid_argument(where + ": duplicate key '" + full + "'");
    table[full] = parse_value(trimmed(body.substr(eq + 1)), where);
  }
  return table;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string value_text(const TomlValue& v) {
  switch (v.kind) {
    case TomlValue::Kind::string_v:
      return quote(v.s);
    case TomlValue::Kind::int_v:
      return std::to_string(v.i);
    case TomlValue::Kind::float_v: {
      std::string t = format_double(v.d);
      if (t.find('.') == std::string::npos &&
          t.find('e') == std::string::npos &&
          t.find("inf") == std::string::npos &&
          t.find("nan") == std::string::npos)
        t += ".0";  // keep the float kind through a round trip
      return t;
    }
    case TomlValue::Kind::bool_v:
      return v.b ? "true" : "false";
    case TomlValue::Kind::array_v: {
      std::string out = "[";
      for (std::size_t k = 0; k < v.items.size(); ++k) {
        if (k) out += ", ";
        out += value_text(v.items[k]);
      }
      return out + "]";
    }
  }
  throw std::invalid_argument("bad value kind");
}

}  // namespace

std::string write_toml(const TomlTable& table) {
  std::ostringstream os;
  bool wrote_any = false;
  for (const auto& [key, value] : table) {
    if (key.find('.') != std::string::npos) continue;
    os << key << " = " << value_text(value) << '\n';
    wrote_any = true;
  }
  // regroup dotted keys under their table so each header appears once, in
  // sorted order; leaves inherit the map's ordering
  std::map<std::string, std::vector<const TomlTable::value_type*>> groups;
  for (const auto& kv : table) {
    const std::size_t dot = kv.first.rfind('.');
    if (dot != std::string::npos) groups[kv.first.substr(0, dot)].push_back(&kv);
  }
  for (const auto& [group, entries] : groups) {
    if (wrote_any) os << '\n';
    os << '[' << group << "]\n";
    wrote_any = true;
    for (const auto* kv : entries) {
      const std::size_t dot = kv->first.rfind('.');
      os << kv->first.substr(dot + 1) << " = " << value_text(kv->second)
         << '\n';
    }
  }
  return os.str();
}

}  // namespace fastnn
