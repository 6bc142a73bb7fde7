#include "ckm/app/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <openssl/evp.h>

#include "ckm/error.hpp"

namespace ckm::app {

namespace {

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

double parse_double(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ConfigError, what + ": '" + raw + "' is not a number");
  }
  return v;
}

// '#' comments are accepted next to the ';' comments boost understands.
std::string strip_hash_comments(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') line.clear();
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::vector<double> parse_numbers(const std::string& raw, const std::string& what) {
  const std::string text = trim(raw);
  std::vector<double> out;
  if (text.empty()) return out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::is_any_of(":"));
    if (parts.size() != 3) {
      throw Error(ErrorCode::ConfigError, what + ": a range needs start:step:stop");
    }
    const double start = parse_double(parts[0], what);
    const double step = parse_double(parts[1], what);
    const double stop = parse_double(parts[2], what);
    if (!(step > 0.0) || stop < start) {
      throw Error(ErrorCode::ConfigError, what + ": range needs step > 0 and stop >= start");
    }
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    if (count > 1000000) throw Error(ErrorCode::ConfigError, what + ": range too long");
    for (long i = 0; i <= count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::is_any_of(","));
  for (const auto& p : parts) out.push_back(parse_double(p, what));
  return out;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config c;
  c.sha256_ = sha256_hex(text);
  std::istringstream in(strip_hash_comments(text));
  try {
    boost::property_tree::ini_parser::read_ini(in, c.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  return c;
}

bool Config::has(const std::string& key) const {
  return static_cast<bool>(tree_.get_optional<std::string>(key));
}

std::string Config::text(const std::string& key) const {
  const auto v = tree_.get_optional<std::string>(key);
  if (!v) throw Error(ErrorCode::ConfigError, "config key '" + key + "' is required");
  return trim(*v);
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const { return parse_double(text(key), key); }

double Config::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string s = text(key);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not an integer");
  }
  return v;
}

bool Config::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string s = boost::algorithm::to_lower_copy(text(key));
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected true or false");
}

std::vector<double> Config::numbers(const std::string& key) const {
  return parse_numbers(text(key), key);
}

std::vector<std::vector<double>> Config::points(const std::string& key) const {
  std::vector<std::string> parts;
  const std::string t = text(key);
  boost::algorithm::split(parts, t, boost::is_any_of("|"));
  std::vector<std::vector<double>> out;
  for (const auto& p : parts) {
    auto v = parse_numbers(p, key);
    if (v.empty()) throw Error(ErrorCode::ConfigError, key + ": empty point");
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> Config::words(const std::string& key) const {
  std::vector<std::string> parts;
  const std::string t = text(key);
  boost::algorithm::split(parts, t, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    auto w = trim(p);
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

void Config::check_keys(const std::set<std::string>& allowed) const {
  for (const auto& [section, body] : tree_) {
    if (body.empty() && !body.data().empty()) {
      throw Error(ErrorCode::ConfigError, "config key '" + section + "' must sit in a section");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!allowed.count(full)) {
        throw Error(ErrorCode::ConfigError, "unknown config key '" + full + "'");
      }
    }
  }
}

}  // namespace ckm::app
