#pragma once

// Flat typed key-value configuration: one `key:type = value` entry per line, `#` comments.
// Types: int, real, bool, string, list (comma-separated reals in brackets), profile.
// Profiles: zero | gaussian(center=, width=, amplitude=) | bump(a=, b=, amplitude=) |
//           file(path=) | forward.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"

namespace kdv {

/// Malformed configuration or command line; carries the offending field path.
class UsageError : public std::invalid_argument {
 public:
  UsageError(const std::string& field, const std::string& what)
      : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Profile {
  enum class Kind { Zero, Gaussian, Bump, File, Forward };
  Kind kind = Kind::Zero;
  double center = 0.0, width = 1.0, amplitude = 1.0;
  double a = 0.0, b = 1.0;
  std::string path;
  std::vector<double> file_x, file_v;  // loaded samples for Kind::File

  double operator()(double x) const {
    switch (kind) {
      case Kind::Zero:
      case Kind::Forward: return 0.0;
      case Kind::Gaussian: {
        const double z = (x - center) / width;
        return amplitude * std::exp(-z * z);
      }
      case Kind::Bump: return amplitude * smooth_bump(x, a, b);
      case Kind::File: {
        if (file_x.empty() || x <= file_x.front() || x >= file_x.back()) return 0.0;
        const auto it = std::upper_bound(file_x.begin(), file_x.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - file_x.begin());
        const double th = (x - file_x[j - 1]) / (file_x[j] - file_x[j - 1]);
        return (1.0 - th) * file_v[j - 1] + th * file_v[j];
      }
    }
    return 0.0;
  }
};

using ConfigValue = std::variant<std::int64_t, double, bool, std::string, std::vector<double>, Profile>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw UsageError(field, "expected a real number, got '" + t + "'");
  }
  if (used != t.size() || !std::isfinite(v)) throw UsageError(field, "expected a real number, got '" + t + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw UsageError(field, "expected an integer, got '" + t + "'");
  }
  if (used != t.size()) throw UsageError(field, "expected an integer, got '" + t + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline void load_profile_file(Profile& p, const std::string& field) {
  std::ifstream in(p.path);
  if (!in) throw UsageError(field, "cannot open profile file '" + p.path + "'");
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() < 2) throw UsageError(field, "profile file rows need two columns");
    p.file_x.push_back(parse_real(cells[0], field));
    p.file_v.push_back(parse_real(cells[1], field));
  }
  for (std::size_t i = 1; i < p.file_x.size(); ++i)
    if (!(p.file_x[i] > p.file_x[i - 1])) throw UsageError(field, "profile file abscissae must increase");
}

inline Profile parse_profile(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  Profile p;
  const auto open = t.find('(');
  const std::string name = trim(t.substr(0, open));
  std::map<std::string, std::string> args;
  if (open != std::string::npos) {
    if (t.back() != ')') throw UsageError(field, "unbalanced parentheses in profile");
    const std::string inner = t.substr(open + 1, t.size() - open - 2);
    if (!trim(inner).empty())
      for (const auto& kv : split(inner, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError(field, "profile arguments are name=value pairs");
        args[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
      }
  }
  auto take = [&](const char* key, double fallback) {
    const auto it = args.find(key);
    if (it == args.end()) return fallback;
    const double v = parse_real(it->second, field + "." + key);
    args.erase(it);
    return v;
  };
  if (name == "zero") {
    p.kind = Profile::Kind::Zero;
  } else if (name == "forward") {
    p.kind = Profile::Kind::Forward;
  } else if (name == "gaussian") {
    p.kind = Profile::Kind::Gaussian;
    p.center = take("center", 0.0);
    p.width = take("width", 1.0);
    p.amplitude = take("amplitude", 1.0);
    if (!(p.width > 0.0)) throw UsageError(field + ".width", "must be positive");
  } else if (name == "bump") {
    p.kind = Profile::Kind::Bump;
    p.a = take("a", 0.0);
    p.b = take("b", 1.0);
    p.amplitude = take("amplitude", 1.0);
    if (!(p.a < p.b)) throw UsageError(field, "bump needs a < b");
  } else if (name == "file") {
    p.kind = Profile::Kind::File;
    const auto it = args.find("path");
    if (it == args.end()) throw UsageError(field, "file profile needs path=");
    p.path = it->second;
    args.erase(it);
    load_profile_file(p, field);
  } else {
    throw UsageError(field, "unknown profile '" + name + "'");
  }
  if (!args.empty()) throw UsageError(field, "unknown profile argument '" + args.begin()->first + "'");
  return p;
}

inline std::string canonical_profile(const Profile& p) {
  switch (p.kind) {
    case Profile::Kind::Zero: return "zero";
    case Profile::Kind::Forward: return "forward";
    case Profile::Kind::Gaussian:
      return "gaussian(amplitude=" + format_real(p.amplitude) + ",center=" + format_real(p.center) +
             ",width=" + format_real(p.width) + ")";
    case Profile::Kind::Bump:
      return "bump(a=" + format_real(p.a) + ",amplitude=" + format_real(p.amplitude) + ",b=" + format_real(p.b) + ")";
    case Profile::Kind::File: return "file(path=" + p.path + ")";
  }
  return "?";
}

inline const char* type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0: return "int";
    case 1: return "real";
    case 2: return "bool";
    case 3: return "string";
    case 4: return "list";
    default: return "profile";
  }
}

}  // namespace detail

inline ConfigValue parse_config_value(const std::string& type, const std::string& text, const std::string& field) {
  const std::string t = detail::trim(text);
  if (type == "int") return detail::parse_int(t, field);
  if (type == "real") return detail::parse_real(t, field);
  if (type == "bool") {
    if (t == "true") return true;
    if (t == "false") return false;
    throw UsageError(field, "expected true or false");
  }
  if (type == "string") {
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
    return t;
  }
  if (type == "list") {
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') throw UsageError(field, "lists are written [a, b, ...]");
    std::vector<double> out;
    const std::string inner = detail::trim(t.substr(1, t.size() - 2));
    if (!inner.empty())
      for (const auto& cell : detail::split(inner, ',')) out.push_back(detail::parse_real(cell, field));
    return out;
  }
  if (type == "profile") return detail::parse_profile(t, field);
  throw UsageError(field, "unknown type '" + type + "'");
}

class Config {
 public:
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  void set(const std::string& key, ConfigValue v) { entries_[key] = std::move(v); }
  const std::map<std::string, ConfigValue>& entries() const { return entries_; }

  /// Adds every entry of `defaults` that is not already present.
  void merge_defaults(const Config& defaults) {
    for (const auto& [k, v] : defaults.entries_)
      if (!has(k)) entries_[k] = v;
  }

  double real(const std::string& key) const {
    const auto& v = at(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw UsageError(key, std::string("expected real, found ") + detail::type_name(v));
  }
  std::int64_t integer(const std::string& key) const { return get<std::int64_t>(key, "int"); }
  std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw UsageError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
  }
  bool boolean(const std::string& key) const { return get<bool>(key, "bool"); }
  const std::string& string(const std::string& key) const { return get<std::string>(key, "string"); }
  const std::vector<double>& list(const std::string& key) const { return get<std::vector<double>>(key, "list"); }
  const Profile& profile(const std::string& key) const { return get<Profile>(key, "profile"); }

  /// Canonical text: sorted keys, normalized values, output location excluded.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
      if (k == "output_dir") continue;
      out += k;
      out += ':';
      out += detail::type_name(v);
      out += '=';
      out += canonical_value(v);
      out += '\n';
    }
    return out;
  }

  /// FNV-1a over the canonical text, as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  static std::string canonical_value(const ConfigValue& v) {
    switch (v.index()) {
      case 0: return std::to_string(std::get<std::int64_t>(v));
      case 1: return detail::format_real(std::get<double>(v));
      case 2: return std::get<bool>(v) ? "true" : "false";
      case 3: return "\"" + std::get<std::string>(v) + "\"";
      case 4: {
        std::string s = "[";
        const auto& l = std::get<std::vector<double>>(v);
        for (std::size_t i = 0; i < l.size(); ++i) s += (i ? "," : "") + detail::format_real(l[i]);
        return s + "]";
      }
      default: return detail::canonical_profile(std::get<Profile>(v));
    }
  }

 private:
  const ConfigValue& at(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw UsageError(key, "missing required field");
    return it->second;
  }
  template <class V>
  const V& get(const std::string& key, const char* want) const {
    const auto& v = at(key);
    if (const auto* p = std::get_if<V>(&v)) return *p;
    throw UsageError(key, std::string("expected ") + want + ", found " + detail::type_name(v));
  }

  std::map<std::string, ConfigValue> entries_;
};

/// Parses the text form; `source` prefixes error messages.
inline Config parse_config(const std::string& text, const std::string& source = "config") {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where, "expected 'key:type = value'");
    const std::string lhs = detail::trim(line.substr(0, eq));
    const auto colon = lhs.find(':');
    if (colon == std::string::npos) throw UsageError(where, "missing type annotation in '" + lhs + "'");
    const std::string key = detail::trim(lhs.substr(0, colon));
    const std::string type = detail::trim(lhs.substr(colon + 1));
    if (key.empty()) throw UsageError(where, "empty key");
    if (cfg.has(key)) throw UsageError(key, "duplicate key at " + where);
    cfg.set(key, parse_config_value(type, line.substr(eq + 1), key));
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace kdv
