#include "fedspd/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "fedspd/errors.hpp"

namespace fedspd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void bad_value(const std::string& origin, const std::string& key, int line,
                            const std::string& expected, const std::string& got) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "' expects " +
                    expected + ", got '" + got + "'");
}

long parse_long(const std::string& origin, const std::string& key, int line,
                const std::string& raw) {
  try {
    std::size_t used = 0;
    const long v = std::stol(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    bad_value(origin, key, line, "an integer", raw);
  }
}

double parse_double(const std::string& origin, const std::string& key, int line,
                    const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    bad_value(origin, key, line, "a number", raw);
  }
}

}  // namespace

ParsedConfig ParsedConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

ParsedConfig ParsedConfig::from_text(const std::string& text, std::string origin) {
  ParsedConfig cfg;
  cfg.origin_ = std::move(origin);

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3)
        throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    const auto [it, inserted] = cfg.entries_.emplace(full, Entry{value, lineno});
    if (!inserted)
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": duplicate key '" + full +
                        "' (first set at line " + std::to_string(it->second.line) + ")");
  }
  return cfg;
}

const ParsedConfig::Entry* ParsedConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const ParsedConfig::Entry& ParsedConfig::get(const std::string& key) const {
  const Entry* e = find(key);
  if (e == nullptr) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *e;
}

bool ParsedConfig::has(const std::string& key) const { return find(key) != nullptr; }

int ParsedConfig::line_of(const std::string& key) const {
  const Entry* e = find(key);
  return e == nullptr ? 0 : e->line;
}

std::string ParsedConfig::str(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e == nullptr ? fallback : e->value;
}

std::string ParsedConfig::require_str(const std::string& key) const { return get(key).value; }

long ParsedConfig::integer(const std::string& key, long fallback) const {
  const Entry* e = find(key);
  if (e == nullptr) return fallback;
  return parse_long(origin_, key, e->line, e->value);
}

double ParsedConfig::real(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (e == nullptr) return fallback;
  return parse_double(origin_, key, e->line, e->value);
}

bool ParsedConfig::flag(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (e == nullptr) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  bad_value(origin_, key, e->line, "a boolean (on/off, true/false, yes/no, 1/0)", e->value);
}

std::vector<std::uint64_t> ParsedConfig::u64_list(
    const std::string& key, const std::vector<std::uint64_t>& fallback) const {
  const Entry* e = find(key);
  if (e == nullptr) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_commas(e->value)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      bad_value(origin_, key, e->line, "a comma-separated list of unsigned integers", e->value);
    }
  }
  if (out.empty()) bad_value(origin_, key, e->line, "a nonempty list", e->value);
  return out;
}

std::vector<long> ParsedConfig::int_list(const std::string& key,
                                         const std::vector<long>& fallback) const {
  const Entry* e = find(key);
  if (e == nullptr) return fallback;
  std::vector<long> out;
  for (const auto& item : split_commas(e->value))
    out.push_back(parse_long(origin_, key, e->line, item));
  return out;
}

void ParsedConfig::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [key, entry] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }
}

}  // namespace fedspd
