#pragma once

#include <string>
#include <vector>

#include "aest/core/saddle_loss.hpp"

namespace aest {

/// Euclidean box ∏[lowerᵢ, upperᵢ]; infinite bounds are allowed.
class BoxSpace : public ParamSpace {
 public:
  BoxSpace(std::string id, Eigen::VectorXd lower, Eigen::VectorXd upper);
  static BoxSpace cube(std::string id, std::size_t dim, double half_width);

  const std::string& id() const override { return id_; }
  std::size_t dim() const override { return static_cast<std::size_t>(lower_.size()); }
  void project(Eigen::VectorXd& coords) const override;
  Eigen::VectorXd random_point(Rng& rng) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

 private:
  std::string id_;
  Eigen::VectorXd lower_, upper_;
};

}  // namespace aest
