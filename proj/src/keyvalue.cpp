#include "gres2net/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", source, number, line));
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, number));
    if (kv.values_.count(key) != 0) {
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}' (first on line {})", source, number, key,
                                    kv.lines_[key]));
    }
    kv.values_[key] = trim(line.substr(eq + 1));
    kv.lines_[key] = number;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void KeyValues::fail(const std::string& key, const std::string& message) const {
  if (auto it = lines_.find(key); it != lines_.end()) {
    throw ConfigError(fmt::format("{}:{}: key '{}': {}", source_, it->second, key, message));
  }
  throw ConfigError(fmt::format("{}: key '{}': {}", source_, key, message));
}

std::string KeyValues::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(key, "required key is missing");
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, fmt::format("'{}' is not a number", s));
  return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(key, fmt::format("'{}' is not a non-negative integer", s));
  }
  return v;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  fail(key, fmt::format("'{}' is not a boolean", it->second));
}

std::vector<std::string> KeyValues::get_list(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? std::vector<std::string>{} : split_list(it->second);
}

void KeyValues::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    bool ok = false;
    for (const auto& k : known) {
      if (k == key || (!k.empty() && k.back() == '.' && key.rfind(k, 0) == 0)) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(key, "unknown key");
  }
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace gres2net
