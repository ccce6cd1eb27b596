#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fedspd {

// Flat key-value config text: `key = value` lines, optional `[section]`
// headers (keys below a header are addressed as "section.key"), full-line
// `#` comments. No nesting, no quoting. Every parse error carries the line
// number; lookups record which keys were read so unknown keys can be
// rejected against a schema.
class ParsedConfig {
 public:
  static ParsedConfig from_file(const std::string& path);
  static ParsedConfig from_text(const std::string& text, std::string origin);

  bool has(const std::string& key) const;
  int line_of(const std::string& key) const;  // 0 when absent

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  double real(const std::string& key, double fallback) const;
  bool flag(const std::string& key, bool fallback) const;  // on/off true/false yes/no 1/0
  std::vector<std::uint64_t> u64_list(const std::string& key,
                                      const std::vector<std::uint64_t>& fallback) const;
  std::vector<long> int_list(const std::string& key, const std::vector<long>& fallback) const;

  // Throws ConfigError naming the first key (and line) not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry* find(const std::string& key) const;
  const Entry& get(const std::string& key) const;  // throws when missing

  std::map<std::string, Entry> entries_;
  std::string origin_;
};

}  // namespace fedspd
