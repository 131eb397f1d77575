#pragma once

#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

namespace aest {

/// Sectioned key=value experiment file:
///
///   [dgp]
///   name = gaussian_location
///   mu = 1.0
///   [experiment]
///   n_grid = 500, 1000, 2000
///
/// Lookups use "section.key" paths; missing or malformed entries raise
/// ConfigError naming the path.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& path) const;
  std::string str(const std::string& path) const;
  std::string str(const std::string& path, const std::string& fallback) const;
  double real(const std::string& path) const;
  double real(const std::string& path, double fallback) const;
  long long integer(const std::string& path) const;
  long long integer(const std::string& path, long long fallback) const;
  bool flag(const std::string& path, bool fallback) const;
  /// Comma- or space-separated list.
  std::vector<double> reals(const std::string& path) const;
  std::vector<double> reals(const std::string& path, std::vector<double> fallback) const;

  void set(const std::string& path, const std::string& value);
  /// Keys (without the section) present in `section`.
  std::vector<std::string> keys(const std::string& section) const;

 private:
  boost::property_tree::ptree tree_;
};

}  // namespace aest
