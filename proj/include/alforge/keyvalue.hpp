#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace alforge {

/// Parse failures in manifests, config files and echoed configs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered `key = value` text. Lines starting with '#' and blank lines are
/// ignored; keys and values are trimmed.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

/// Shortest text that round-trips a double exactly ("%.17g").
std::string format_double(double v);

double kv_double(const KeyValues& kv, const std::string& key, double fallback);
std::uint64_t kv_uint(const KeyValues& kv, const std::string& key, std::uint64_t fallback);
std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback);

double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_uint(const std::string& text, const std::string& what);
std::vector<std::string> split(const std::string& text, char sep);
std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

/// FNV-1a over the bytes of `text`; used for cache keys.
std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace alforge
