#include "cli/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace andikit::cli {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '-';
  });
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
  values_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::optional<std::string> RunConfig::lookup(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
  auto v = lookup(key).value_or(fallback);
  note(key, v);
  return v;
}

std::string RunConfig::require_string(const std::string& key) {
  auto v = lookup(key);
  if (!v || v->empty()) throw ConfigError("missing required key '" + key + "'");
  note(key, *v);
  return *v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  auto v = lookup(key);
  if (!v) {
    note(key, std::to_string(fallback));
    return fallback;
  }
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not a non-negative integer");
  }
  note(key, *v);
  return out;
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

double RunConfig::get_double(const std::string& key, double fallback) {
  auto v = lookup(key);
  if (!v) {
    note(key, format_double(fallback));
    return fallback;
  }
  double out = 0.0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
  }
  note(key, *v);
  return out;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) {
  auto v = lookup(key);
  if (!v) {
    note(key, fallback ? "true" : "false");
    return fallback;
  }
  bool out;
  if (*v == "true" || *v == "1" || *v == "yes") out = true;
  else if (*v == "false" || *v == "0" || *v == "no") out = false;
  else throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
  note(key, *v);
  return out;
}

std::vector<std::string> RunConfig::get_list(const std::string& key, const std::vector<std::string>& fallback) {
  auto v = lookup(key);
  auto out = v ? split_list(*v) : fallback;
  note(key, join(out));
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  auto v = lookup(key);
  if (!v) {
    std::vector<std::string> s;
    for (double d : fallback) s.push_back(format_double(d));
    note(key, join(s));
    return fallback;
  }
  std::vector<double> out;
  for (const auto& item : split_list(*v)) {
    double d = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), d);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw ConfigError("key '" + key + "': '" + item + "' is not a number");
    }
    out.push_back(d);
  }
  note(key, *v);
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string s;
  for (const auto& [k, v] : resolved_) s += k + " = " + v + "\n";
  return s;
}

std::vector<std::string> RunConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!resolved_.count(k)) out.push_back(k);
  }
  return out;
}

}  // namespace andikit::cli
