#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mnmt {

// Raised for malformed config files and bad values; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" settings; '#' starts a comment. Later assignments win.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  // Sorted "key=value" lines; the config hash is FNV-1a over this text.
  std::string canonical() const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mnmt
