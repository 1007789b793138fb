#pragma once

#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Key-value tree read from INI-style `.cfg` files. Keys are addressed as
/// `section.name`.
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& file);
  static Config parse(const std::string& text);
  void save(const std::filesystem::path& file) const;
  std::string to_string() const;

  bool has(const std::string& key) const;

  /// Value of `key`, or `fallback` when absent. A present but malformed
  /// value is an error.
  template <typename T>
  T get(const std::string& key, T fallback) const {
    auto node = tree_.get_child_optional(key);
    if (!node) return fallback;
    auto v = node->get_value_optional<T>();
    if (!v) throw ConfigError("malformed value for config key '" + key + "'");
    return *v;
  }

  template <typename T>
  T require(const std::string& key) const {
    auto v = tree_.get_optional<T>(key);
    if (!v) throw ConfigError("missing or malformed config key '" + key + "'");
    return *v;
  }

  /// Comma-separated list of numbers.
  std::vector<double> get_list(const std::string& key,
                               std::vector<double> fallback = {}) const;

  template <typename T>
  void set(const std::string& key, const T& value) {
    tree_.put(key, value);
  }
  void set_list(const std::string& key, const std::vector<double>& values);

  const boost::property_tree::ptree& tree() const { return tree_; }

 private:
  boost::property_tree::ptree tree_;
};

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

}  // namespace aim
