#include "aest/harness/config.hpp"

#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include "aest/core/errors.hpp"

namespace aest {

namespace pt = boost::property_tree;

Config Config::from_file(const std::string& path) {
  Config c;
  try {
    pt::read_ini(path, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path, e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return c;
}

Config Config::from_string(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<string>", e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return c;
}

bool Config::has(const std::string& path) const { return tree_.get_optional<std::string>(path).has_value(); }

std::string Config::str(const std::string& path) const {
  auto v = tree_.get_optional<std::string>(path);
  if (!v) throw ConfigError(path, "missing required key");
  return boost::algorithm::trim_copy(*v);
}

std::string Config::str(const std::string& path, const std::string& fallback) const {
  return has(path) ? str(path) : fallback;
}

namespace {

template <class T>
T parse(const std::string& path, const std::string& text, const char* kind) {
  try {
    return boost::lexical_cast<T>(boost::algorithm::trim_copy(text));
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError(path, "expected " + std::string(kind) + ", got '" + text + "'");
  }
}

}  // namespace

double Config::real(const std::string& path) const { return parse<double>(path, str(path), "a number"); }

double Config::real(const std::string& path, double fallback) const {
  return has(path) ? real(path) : fallback;
}

long long Config::integer(const std::string& path) const {
  return parse<long long>(path, str(path), "an integer");
}

long long Config::integer(const std::string& path, long long fallback) const {
  return has(path) ? integer(path) : fallback;
}

bool Config::flag(const std::string& path, bool fallback) const {
  if (!has(path)) return fallback;
  std::string v = boost::algorithm::to_lower_copy(str(path));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(path, "expected a boolean, got '" + v + "'");
}

std::vector<double> Config::reals(const std::string& path) const {
  std::vector<std::string> parts;
  std::string s = str(path);
  boost::algorithm::split(parts, s, boost::is_any_of(", \t"), boost::token_compress_on);
  std::vector<double> out;
  for (const auto& p : parts) {
    if (!p.empty()) out.push_back(parse<double>(path, p, "a number"));
  }
  if (out.empty()) throw ConfigError(path, "expected a non-empty list");
  return out;
}

std::vector<double> Config::reals(const std::string& path, std::vector<double> fallback) const {
  return has(path) ? reals(path) : fallback;
}

void Config::set(const std::string& path, const std::string& value) { tree_.put(path, value); }

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  auto child = tree_.get_child_optional(section);
  if (!child) return out;
  for (const auto& kv : *child) out.push_back(kv.first);
  return out;
}

}  // namespace aest
