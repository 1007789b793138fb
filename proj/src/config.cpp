#include "aim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

namespace aim {

namespace pt = boost::property_tree;

Config Config::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file '" + file.string() + "'");
  Config cfg;
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config file '" + file.string() + "': " + e.message());
  }
  return cfg;
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  Config cfg;
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config text: " + e.message());
  }
  return cfg;
}

void Config::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write config file '" + file.string() + "'");
  pt::write_ini(out, tree_);
}

std::string Config::to_string() const {
  std::ostringstream out;
  pt::write_ini(out, tree_);
  return out.str();
}

bool Config::has(const std::string& key) const {
  return static_cast<bool>(tree_.get_child_optional(key));
}

std::vector<double> Config::get_list(const std::string& key,
                                     std::vector<double> fallback) const {
  auto raw = tree_.get_optional<std::string>(key);
  if (!raw) return fallback;
  std::vector<double> out;
  std::stringstream ss(*raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("malformed number '" + item + "' in config key '" + key + "'");
    }
    out.push_back(v);
  }
  return out;
}

void Config::set_list(const std::string& key, const std::vector<double>& values) {
  std::string joined;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) joined += ", ";
    joined += format_double(values[i]);
  }
  tree_.put(key, joined);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace aim
