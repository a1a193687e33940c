#pragma once

#include "hps/common.hpp"
#include "hps/leafops.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hps {

/// Bessel functions of the second kind, orders 0 and 1.
double bessel_y0(double x);
double bessel_y1(double x);

/// A boundary value problem on the unit square.
///
/// Builtin problems are stated as -Lap u - c1 u_1 - c2 u_2 - c u = 0, so their
/// first-order and zeroth-order coefficients enter `coeffs` with flipped sign.
struct ProblemSpec {
  using Gradient = std::function<std::array<double, 2>(Point)>;

  std::string name;
  CoefficientField coeffs;
  CoefficientField::Function boundary;
  CoefficientField::Function exact;  ///< empty when no closed form is known
  Gradient exact_gradient;
  std::optional<double> kappa;
  std::string description;

  bool has_exact() const { return static_cast<bool>(exact); }
};

struct ProblemParams {
  std::optional<double> kappa;
  /// Required by helmholtz_scaled, which ties kappa to the resolution.
  int levels = -1;
  int q = -1;
  /// Use the original convection magnitudes (1e5, 1e4) instead of the
  /// desk-scale default of 1e3.
  bool paper_scale = false;
  /// Overrides the convection magnitude of the two convection problems.
  std::optional<double> convection;
};

/// laplace, helmholtz, helmholtz_scaled, constant_convection,
/// diffusion_convection, variable_helmholtz. Throws ConfigError for unknown
/// names or missing parameters.
ProblemSpec builtin_problem(const std::string& name, const ProblemParams& params = {});

std::vector<std::string> builtin_problem_names();

/// Point source location for the known-solution problems.
inline constexpr Point kSourcePoint{-2.0, 0.0};

/// floor(2 pi q 2^L / 12): twelve tabulation points per wavelength.
double scaled_wavenumber(int levels, int q);

}  // namespace hps
