#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hps {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Base class for all errors raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, unknown problem names, malformed config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A local operator that must be inverted is (numerically) singular. For
/// Helmholtz-type problems this happens when a box size hits a Dirichlet
/// eigenvalue of the box; changing the number of levels or q moves it away.
class ResonanceError : public Error {
 public:
  enum class Kind { leaf, merge, hbs };

  ResonanceError(Kind kind, int box, const std::string& what)
      : Error(what), kind_(kind), box_(box) {}

  Kind kind() const noexcept { return kind_; }
  /// Box (or HBS node) id the failure was detected at; -1 if unknown.
  int box() const noexcept { return box_; }

 private:
  Kind kind_;
  int box_;
};

}  // namespace hps
