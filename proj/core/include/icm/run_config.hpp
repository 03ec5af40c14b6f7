#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace icm::cli {

// Plain-text key=value run configuration.  '#' starts a comment; blank lines
// are ignored; keys may not repeat.  Every consumer declares the keys it
// accepts and rejects anything else, so configs stay auditable.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  // Typed getters; the default is returned when the key is absent.
  // Malformed values raise ConfigError naming the key.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  std::vector<double> get_real_list(const std::string& key,
                                    const std::vector<double>& fallback) const;

  std::uint64_t require_seed() const;  // ConfigError when absent

  // Rejects any key outside `allowed` (ConfigError naming the stray key).
  void require_known(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace icm::cli
