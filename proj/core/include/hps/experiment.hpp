#pragma once

#include "hps/problems.hpp"
#include "hps/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hps {

/// Evaluation points for the self-convergence metrics.
inline constexpr Point kInteriorProbe{0.75, 0.25};
inline constexpr Point kBoundaryProbe{0.75, 0.0};

struct ExperimentConfig {
  std::string problem = "laplace";
  ProblemParams params;
  int levels = 3;
  int q = 16;
  double eps = 1e-10;
  Index switch_threshold = 2000;
  int threads = 1;
  /// Runs one report per entry when non-empty (levels is then ignored).
  std::vector<int> series;
  std::vector<Point> targets;
  std::string report_path;
  std::string csv_path;
};

/// Parses the JSON config document
///   {problem, kappa?, L, q, eps, switch_threshold, report_path, series?,
///    csv_path?, targets?, threads?, paper_scale?, convection?}.
/// switch_threshold may be the string "inf". Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);

struct ExperimentReport {
  std::string problem;
  std::string description;
  std::optional<double> kappa;
  int q = 0;
  int levels = 0;
  Index N = 0;
  Index N_tot = 0;
  double eps = 0.0;
  Index switch_threshold = 0;
  double t_build = 0.0;
  double t_solve = 0.0;
  double t_apply = 0.0;
  double memory_mb = 0.0;
  std::optional<double> e_pot;
  std::optional<double> e_grad;
  std::optional<double> e_int;
  std::optional<double> e_bnd;
  /// u and the outward normal derivative at the self-convergence probes.
  double u_interior = 0.0;
  double un_boundary = 0.0;
  RankStats ranks;
  int dense_merges = 0;
  int hbs_merges = 0;
  std::vector<Point> targets;
  std::vector<double> target_values;
};

/// N + (2^L (q - 1) + 1)^2.
Index total_points(int levels, int q);

struct KnownSolutionErrors {
  double e_pot = 0.0;   ///< max |u - u_exact| over Gauss nodes off the domain boundary
  double e_grad = 0.0;  ///< max |T^1 f - exact flux| over boundary nodes
};

KnownSolutionErrors known_solution_errors(const HpsSolver& solver, const Vector& u,
                                          const ProblemSpec& problem);

/// Builds, solves, applies T^1 and evaluates metrics for each requested level.
/// Problems without a closed-form solution are compared with a run at L + 1.
std::vector<ExperimentReport> run_experiment(const ExperimentConfig& config);

std::string reports_to_json(const std::vector<ExperimentReport>& reports);
std::string reports_to_csv(const std::vector<ExperimentReport>& reports);

/// Writes config.report_path (JSON) and config.csv_path (CSV) when set.
void write_reports(const ExperimentConfig& config, const std::vector<ExperimentReport>& reports);

}  // namespace hps
