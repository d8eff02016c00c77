#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hgdr {

// Flat `key = value` file. Blank lines and lines starting with '#' are
// ignored. Every key must be read at least once before `reject_unknown()`,
// which throws listing the leftovers.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& source = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }
  bool get_bool(const std::string& key, bool fallback);
  // Comma-separated list; missing key yields `fallback`.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback);

  void reject_unknown() const;

 private:
  const std::string* lookup(const std::string& key);

  std::string source_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace hgdr
