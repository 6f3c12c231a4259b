// SPDX-License-Identifier: Apache-2.0
#include "irnn/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "irnn/errors.hpp"
#include "irnn/text.hpp"

namespace irnn::config {

KeyValues KeyValues::parse(std::string_view body, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= body.size()) {
    auto end = body.find('\n', start);
    if (end == std::string_view::npos) {
      end = body.size();
    }
    std::string_view line = body.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = text::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    kv.values_[key] = std::string(text::trim(line.substr(eq + 1)));
    if (end == body.size()) {
      break;
    }
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string KeyValues::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  double v = 0.0;
  if (!text::parse_double(it->second, v)) {
    throw ConfigError(source_ + ": '" + key + "' is not a number: " + it->second);
  }
  return v;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  std::int64_t v = 0;
  const std::string& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(source_ + ": '" + key + "' is not an integer: " + s);
  }
  return v;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(source_ + ": '" + key + "' is not a boolean: " + s);
}

std::vector<double> KeyValues::get_doubles(const std::string& key,
                                           const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  std::vector<double> out;
  for (const auto& item : text::split_csv_line(it->second)) {
    double v = 0.0;
    if (!text::parse_double(item, v)) {
      throw ConfigError(source_ + ": '" + key + "' has a non-numeric entry: " + item);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> KeyValues::get_strings(
    const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  return text::split_csv_line(it->second);
}

void KeyValues::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (allowed.count(key) == 0) {
      throw ConfigError(source_ + ": unknown key '" + key + "'");
    }
  }
}

std::string KeyValues::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key + "=" + value + "\n";
  }
  return out;
}

}  // namespace irnn::config
