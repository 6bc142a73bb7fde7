#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace ckm::app {

/// INI run configuration: `[section]` headers, `key = value` lines and `;`
/// or `#` comments. Lookups name keys as "section.key". Every key present in
/// the file must be declared by the command that reads it (see `check_keys`),
/// so misspelled keys are reported instead of silently ignored.
class Config {
public:
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  /// SHA-256 of the raw configuration bytes, lowercase hex.
  const std::string& sha256() const noexcept { return sha256_; }

  bool has(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  /// Comma-separated numbers, or a range "start:step:stop" (inclusive, points
  /// start + i * step).
  std::vector<double> numbers(const std::string& key) const;
  /// Points separated by '|', coordinates by ','.
  std::vector<std::vector<double>> points(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;

  /// ConfigError naming the first key outside `allowed`.
  void check_keys(const std::set<std::string>& allowed) const;

private:
  boost::property_tree::ptree tree_;
  std::string sha256_;
};

std::vector<double> parse_numbers(const std::string& text, const std::string& what);
std::string sha256_hex(const std::string& bytes);

}  // namespace ckm::app
