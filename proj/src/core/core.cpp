#include <algorithm>
#include <cmath>
#include <sstream>

#include "aest/core/box_space.hpp"
#include "aest/core/dataset.hpp"
#include "aest/core/errors.hpp"
#include "aest/core/param.hpp"
#include "aest/core/rng.hpp"

namespace aest {

namespace {

std::string format_domain_message(const std::string& name, double t, const std::string& domain) {
  std::ostringstream os;
  os << "conjugate of " << name << " evaluated at t=" << t << " outside domain " << domain;
  return os.str();
}

}  // namespace

DomainViolation::DomainViolation(std::string divergence, double t, std::string domain)
    : std::runtime_error(format_domain_message(divergence, t, domain)),
      divergence_(std::move(divergence)),
      value_(t),
      domain_(std::move(domain)) {}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(root);
  std::uint64_t depth = 1;
  for (std::uint64_t counter : path) {
    s = mix64(s ^ mix64(counter + 0x632BE59BD9B4E019ULL * depth));
    ++depth;
  }
  return s;
}

void ToleranceBudget::validate() const {
  if (eta_tilde_max < 0 || eta_max < 0 || max_iters < 0) {
    throw InvalidArgument("tolerance budget entries must be nonnegative");
  }
  if (restarts < 1) throw InvalidArgument("tolerance budget needs at least one restart");
}

// ---------------------------------------------------------------------------
// ColumnLayout / Dataset

ColumnLayout& ColumnLayout::add(const std::string& role, std::size_t length) {
  roles_[role] = ColumnSlice{width_, length};
  width_ += length;
  return *this;
}

ColumnLayout& ColumnLayout::alias(const std::string& role, ColumnSlice slice) {
  if (slice.offset + slice.length > width_) {
    throw InvalidArgument("column role '" + role + "' exceeds row width");
  }
  roles_[role] = slice;
  return *this;
}

ColumnSlice ColumnLayout::role(const std::string& role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) throw InvalidArgument("dataset has no column role '" + role + "'");
  return it->second;
}

Dataset::Dataset(ColumnLayout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (layout_.width() == 0) throw InvalidArgument("dataset rows must have positive length");
  if (values_.size() % layout_.width() != 0) {
    throw InvalidArgument("dataset values are not a whole number of rows");
  }
  n_ = values_.size() / layout_.width();
  if (n_ == 0) throw InvalidArgument("dataset must hold at least one observation");
  for (const auto& [name, s] : layout_.roles()) {
    if (s.offset + s.length > layout_.width()) {
      throw InvalidArgument("column role '" + name + "' exceeds row width");
    }
  }
}

Eigen::MatrixXd Dataset::column_block(const std::string& role) const {
  ColumnSlice s = layout_.role(role);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(s.length));
  for (std::size_t i = 0; i < n_; ++i) {
    Row r = slice(i, s);
    for (std::size_t j = 0; j < s.length; ++j) out(i, j) = r[j];
  }
  return out;
}

Dataset Dataset::permuted(const std::vector<std::size_t>& order) const {
  if (order.size() != n_) throw InvalidArgument("permutation length differs from n");
  std::vector<double> v;
  v.reserve(values_.size());
  for (std::size_t i : order) {
    Row r = row(i);
    v.insert(v.end(), r.begin(), r.end());
  }
  return Dataset(layout_, std::move(v));
}

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, n_);
  return Dataset(layout_, std::vector<double>(values_.begin(),
                                              values_.begin() + count * width()));
}

Dataset Dataset::repeated(std::size_t times) const {
  std::vector<double> v;
  v.reserve(values_.size() * times);
  for (std::size_t i = 0; i < n_; ++i) {
    Row r = row(i);
    for (std::size_t k = 0; k < times; ++k) v.insert(v.end(), r.begin(), r.end());
  }
  return Dataset(layout_, std::move(v));
}

// ---------------------------------------------------------------------------
// BoxSpace

BoxSpace::BoxSpace(std::string id, Eigen::VectorXd lower, Eigen::VectorXd upper)
    : id_(std::move(id)), lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw InvalidArgument("box bounds differ in length");
  if ((lower_.array() > upper_.array()).any()) throw InvalidArgument("box lower exceeds upper");
}

BoxSpace BoxSpace::cube(std::string id, std::size_t dim, double half_width) {
  Eigen::VectorXd h = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), half_width);
  return BoxSpace(std::move(id), -h, h);
}

void BoxSpace::project(Eigen::VectorXd& coords) const {
  coords = coords.cwiseMax(lower_).cwiseMin(upper_);
}

Eigen::VectorXd BoxSpace::random_point(Rng& rng) const {
  Eigen::VectorXd x(lower_.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double lo = lower_[i], hi = upper_[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      x[i] = rng.uniform(lo, hi);
    } else {
      double centre = std::isfinite(lo) ? lo + 1.0 : (std::isfinite(hi) ? hi - 1.0 : 0.0);
      x[i] = centre + rng.normal();
    }
  }
  project(x);
  return x;
}

Eigen::VectorXd BoxSpace::initial_point(Rng&) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lower_.size());
  project(x);
  return x;
}

}  // namespace aest
