#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace aest {

/// Dimension or argument contract violated by the caller.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A loss, iterate or probe became non-finite. Carries the row or iteration
/// index when one is known.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what,
                            std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), index_(index) {}
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

/// Argument of a convex conjugate fell outside its effective domain.
class DomainViolation : public std::runtime_error {
 public:
  DomainViolation(std::string divergence, double t, std::string domain);
  const std::string& divergence() const { return divergence_; }
  double value() const { return value_; }
  const std::string& domain() const { return domain_; }

 private:
  std::string divergence_;
  double value_;
  std::string domain_;
};

class InvalidDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Brute-force search found its maximizer on the edge of the search grid.
class BracketFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A weighting, information or design matrix could not be inverted.
class SingularMatrix : public std::runtime_error {
 public:
  enum class Kind { Weighting, Information, Design };
  SingularMatrix(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class InvalidProblem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegularizationFailure : public std::runtime_error {
 public:
  RegularizationFailure(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_distance() const { return achieved_; }

 private:
  double achieved_;
};

/// Missing or malformed experiment configuration; `path()` is section.key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace aest
