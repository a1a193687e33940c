#include "hps/problems.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hps {

double bessel_y0(double x) { return std::cyl_neumann(0.0, x); }
double bessel_y1(double x) { return std::cyl_neumann(1.0, x); }

double scaled_wavenumber(int levels, int q) {
  if (levels < 0 || q < 1) throw ConfigError("helmholtz_scaled needs levels and q");
  return std::floor(2.0 * std::numbers::pi * q * std::ldexp(1.0, levels) / 12.0);
}

std::vector<std::string> builtin_problem_names() {
  return {"laplace",        "helmholtz",           "helmholtz_scaled",
          "constant_convection", "diffusion_convection", "variable_helmholtz"};
}

namespace {

double distance_to_source(Point x) {
  return std::hypot(x.x - kSourcePoint.x, x.y - kSourcePoint.y);
}

CoefficientField::Function unknown_solution_data() {
  return [](Point x) { return std::cos(2.0 * x.x) * (1.0 - 2.0 * x.y); };
}

ProblemSpec helmholtz_problem(std::string name, double kappa) {
  if (!std::isfinite(kappa) || kappa <= 0.0)
    throw ConfigError(name + ": kappa must be positive");
  ProblemSpec p;
  p.name = std::move(name);
  p.kappa = kappa;
  p.coeffs = CoefficientField::laplace();
  p.coeffs.c = [kappa](Point) { return -kappa * kappa; };
  p.exact = [kappa](Point x) { return bessel_y0(kappa * distance_to_source(x)); };
  p.exact_gradient = [kappa](Point x) -> std::array<double, 2> {
    const double r = distance_to_source(x);
    const double g = -kappa * bessel_y1(kappa * r) / r;
    return {g * (x.x - kSourcePoint.x), g * (x.y - kSourcePoint.y)};
  };
  p.boundary = p.exact;
  return p;
}

}  // namespace

ProblemSpec builtin_problem(const std::string& name, const ProblemParams& params) {
  if (name == "laplace") {
    ProblemSpec p;
    p.name = name;
    p.coeffs = CoefficientField::laplace();
    p.exact = [](Point x) { return std::log(distance_to_source(x)); };
    p.exact_gradient = [](Point x) -> std::array<double, 2> {
      const double r2 = std::pow(distance_to_source(x), 2);
      return {(x.x - kSourcePoint.x) / r2, (x.y - kSourcePoint.y) / r2};
    };
    p.boundary = p.exact;
    p.description = "u = log|x - (-2, 0)|";
    return p;
  }
  if (name == "helmholtz") {
    if (!params.kappa) throw ConfigError("helmholtz requires kappa");
    ProblemSpec p = helmholtz_problem(name, *params.kappa);
    p.description = "u = Y0(kappa |x - (-2, 0)|)";
    return p;
  }
  if (name == "helmholtz_scaled") {
    const double kappa = scaled_wavenumber(params.levels, params.q);
    ProblemSpec p = helmholtz_problem(name, kappa);
    std::ostringstream d;
    d << "u = Y0(kappa |x - (-2, 0)|), kappa = floor(2 pi q 2^L / 12) = " << kappa;
    p.description = d.str();
    return p;
  }
  const double convection =
      params.convection.value_or(params.paper_scale
                                     ? (name == "constant_convection" ? 1e5 : 1e4)
                                     : 1e3);
  if (name == "constant_convection") {
    ProblemSpec p;
    p.name = name;
    p.coeffs = CoefficientField::laplace();
    p.coeffs.c2 = [convection](Point) { return convection; };
    p.boundary = unknown_solution_data();
    std::ostringstream d;
    d << "c2 = -" << convection;
    p.description = d.str();
    return p;
  }
  if (name == "diffusion_convection") {
    ProblemSpec p;
    p.name = name;
    p.coeffs = CoefficientField::laplace();
    p.coeffs.c1 = [convection](Point x) {
      return convection * std::cos(4.0 * std::numbers::pi * x.y);
    };
    p.coeffs.c2 = [convection](Point x) {
      return convection * std::cos(4.0 * std::numbers::pi * x.x);
    };
    p.boundary = unknown_solution_data();
    std::ostringstream d;
    d << "c1 = -" << convection << " cos(4 pi x2), c2 = -" << convection << " cos(4 pi x1)";
    p.description = d.str();
    return p;
  }
  if (name == "variable_helmholtz") {
    const double kappa = params.kappa.value_or(640.0);
    if (!std::isfinite(kappa) || kappa <= 0.0)
      throw ConfigError("variable_helmholtz: kappa must be positive");
    ProblemSpec p;
    p.name = name;
    p.kappa = kappa;
    p.coeffs = CoefficientField::laplace();
    p.coeffs.c = [kappa](Point x) {
      const double s = std::sin(4.0 * std::numbers::pi * x.x) * std::sin(4.0 * std::numbers::pi * x.y);
      return -kappa * kappa * (1.0 - s * s);
    };
    p.boundary = unknown_solution_data();
    p.description = "c = kappa^2 (1 - (sin 4 pi x1 sin 4 pi x2)^2)";
    return p;
  }
  throw ConfigError("unknown problem '" + name + "'");
}

}  // namespace hps
