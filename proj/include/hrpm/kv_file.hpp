#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hrpm {

/// Flat `key = value` text file. Blank lines and `#` comments are ignored.
///
/// Readers consume keys through the typed getters; `reject_unused()` then
/// raises a ConfigError naming every key nobody asked for.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback) const;

  void reject_unused() const;

  /// Canonical text: sorted keys, one `key = value` per line.
  std::string serialize() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string trim(const std::string& s);

/// Shortest round-trip decimal text for a double.
std::string format_double(double x);

}  // namespace hrpm
