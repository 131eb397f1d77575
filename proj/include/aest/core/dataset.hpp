#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aest {

using Row = std::span<const double>;

/// Contiguous sub-range of a row, e.g. the instrument block z.
struct ColumnSlice {
  std::size_t offset = 0;
  std::size_t length = 0;

  Row of(Row row) const { return row.subspan(offset, length); }
};

/// Named column roles of a dataset (x, z, y, s, a, s_plus, ...).
class ColumnLayout {
 public:
  ColumnLayout() = default;
  explicit ColumnLayout(std::size_t width) : width_(width) {}

  ColumnLayout& add(const std::string& role, std::size_t length);
  ColumnLayout& alias(const std::string& role, ColumnSlice slice);

  std::size_t width() const { return width_; }
  bool has(const std::string& role) const { return roles_.count(role) != 0; }
  /// Throws InvalidArgument naming the missing role.
  ColumnSlice role(const std::string& role) const;
  const std::map<std::string, ColumnSlice>& roles() const { return roles_; }

 private:
  std::size_t width_ = 0;
  std::map<std::string, ColumnSlice> roles_;
};

/// Observations Y_1..Y_n stored row-major. Immutable after construction.
class Dataset {
 public:
  Dataset(ColumnLayout layout, std::vector<double> values);

  std::size_t n() const { return n_; }
  std::size_t width() const { return layout_.width(); }
  const ColumnLayout& layout() const { return layout_; }

  Row row(std::size_t i) const { return {values_.data() + i * width(), width()}; }
  Row slice(std::size_t i, ColumnSlice s) const { return s.of(row(i)); }
  Row slice(std::size_t i, const std::string& role) const { return slice(i, layout_.role(role)); }

  /// n x length matrix holding one role's columns.
  Eigen::MatrixXd column_block(const std::string& role) const;

  Dataset permuted(const std::vector<std::size_t>& order) const;
  Dataset head(std::size_t count) const;
  /// Each row repeated `times` times in place.
  Dataset repeated(std::size_t times) const;

  const std::vector<double>& values() const { return values_; }

 private:
  ColumnLayout layout_;
  std::vector<double> values_;
  std::size_t n_ = 0;
};

}  // namespace aest
