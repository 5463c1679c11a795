#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gres2net {

/// Flat `key = value` text with dotted keys and `#` comments. Used for run
/// configs, dataset schemas and the checkpoint topology block.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Typed getters throw ConfigError naming the key and the source line.
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Rejects any key not in `known` (exact keys, or prefixes ending in '.').
  void require_known(const std::vector<std::string>& known) const;

  /// Deterministic `key = value` lines in key order.
  std::string to_text() const;
  const std::map<std::string, std::string>& entries() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::string source_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_list(const std::string& s, char sep = ',');
std::string join(const std::vector<std::string>& items, const std::string& sep = ",");

}  // namespace gres2net
