#include "aest/harness/csv.hpp"

#include <cstdio>
#include <fstream>

#include "aest/core/errors.hpp"

namespace aest {

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw InvalidArgument("csv row width differs from header");
  rows_.push_back(cells);
  return *this;
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
}

void CsvTable::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot open '" + path + "' for writing");
  write(f);
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(long long v) { return std::to_string(v); }

}  // namespace aest
