#pragma once

#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "aest/core/dataset.hpp"
#include "aest/core/rng.hpp"

namespace aest::testing {

inline Dataset make_data(const ColumnLayout& layout, const Eigen::MatrixXd& X) {
  std::vector<double> v(static_cast<std::size_t>(X.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      v[static_cast<std::size_t>(i * X.cols() + j)] = X(i, j);
    }
  }
  return Dataset(layout, std::move(v));
}

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) X(i, j) = rng.normal();
  }
  return X;
}

// Single dummy row for data-independent toy losses.
inline Dataset dummy_data() { return Dataset(ColumnLayout().add("y", 1), {0.0}); }

}  // namespace aest::testing
