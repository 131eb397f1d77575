#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aest {

/// Minimal comma-separated table. Numbers are written with 17 significant
/// digits so reruns are byte-identical.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row(const std::vector<std::string>& cells);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  void write(std::ostream& out) const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string cell(double v);
std::string cell(long long v);
inline std::string cell(int v) { return cell(static_cast<long long>(v)); }
inline std::string cell(unsigned long v) { return std::to_string(v); }
inline std::string cell(unsigned long long v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }
inline std::string cell(const std::string& s) { return s; }
inline std::string cell(const char* s) { return s; }

}  // namespace aest
