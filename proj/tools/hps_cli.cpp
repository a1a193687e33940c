// Command-line driver: builds a solver for a builtin problem, solves it and
// writes JSON/CSV reports.
//
//   hps solve --problem laplace --levels 4 --q 16 --tol 1e-10 --report out.json
//   hps run --config experiment.json
//
// Exit status: 0 success, 1 configuration error, 2 solver resonance.

#include "hps/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw hps::ConfigError("bad " + what + ": '" + s + "'");
  return v;
}

hps::Index parse_switch(const std::string& s) {
  if (s == "inf") return hps::SolverOptions::kNeverSwitch;
  const double v = to_double(s, "switch threshold");
  if (v < 0 || v != static_cast<double>(static_cast<hps::Index>(v)))
    throw hps::ConfigError("switch threshold must be a non-negative integer or 'inf'");
  return static_cast<hps::Index>(v);
}

std::vector<int> parse_series(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split(s, ',')) {
    const double v = to_double(item, "series entry");
    if (v != static_cast<double>(static_cast<int>(v)))
      throw hps::ConfigError("series entries must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<hps::Point> parse_targets(const std::string& s) {
  std::vector<hps::Point> out;
  for (const auto& pair : split(s, ';')) {
    const auto xy = split(pair, ',');
    if (xy.size() != 2) throw hps::ConfigError("targets must look like x1,y1;x2,y2");
    out.push_back({to_double(xy[0], "target"), to_double(xy[1], "target")});
  }
  return out;
}

void print_summary(const std::vector<hps::ExperimentReport>& reports) {
  auto show = [](const char* name, const std::optional<double>& v) {
    if (v) std::cout << "  " << name << " " << *v;
  };
  for (const auto& r : reports) {
    std::cout << r.problem << " L=" << r.levels << " q=" << r.q << " N=" << r.N
              << " N_tot=" << r.N_tot << " T_build=" << r.t_build << "s T_solve=" << r.t_solve
              << "s T_apply=" << r.t_apply << "s R=" << r.memory_mb << "MB";
    show("E_pot", r.e_pot);
    show("E_grad", r.e_grad);
    show("E_int", r.e_int);
    show("E_bnd", r.e_bnd);
    if (r.ranks.nodes > 0) std::cout << "  max_rank " << r.ranks.max_rank;
    std::cout << '\n';
    for (std::size_t k = 0; k < r.targets.size(); ++k)
      std::cout << "  u(" << r.targets[k].x << ", " << r.targets[k].y
                << ") = " << r.target_values[k] << '\n';
  }
}

int execute(const hps::ExperimentConfig& config) {
  const auto reports = hps::run_experiment(config);
  hps::write_reports(config, reports);
  std::cout.precision(6);
  print_summary(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical direct solver for variable-coefficient elliptic PDEs"};
  app.require_subcommand(1);

  hps::ExperimentConfig config;
  std::string switch_text = "2000";
  std::string series_text, targets_text;
  std::optional<double> kappa, convection;
  bool paper_scale = false;

  auto* solve = app.add_subcommand("solve", "Solve one builtin problem");
  solve->add_option("--problem", config.problem, "Builtin problem name")->required();
  solve->add_option("--kappa", kappa, "Wavenumber for Helmholtz problems");
  solve->add_option("--levels,-L", config.levels, "Number of refinement levels L");
  solve->add_option("--q", config.q, "Gauss nodes per leaf edge");
  solve->add_option("--tol,--eps", config.eps, "Compression tolerance");
  solve->add_option("--switch", switch_text, "Dense to HBS switch threshold, or 'inf'");
  solve->add_option("--threads", config.threads, "Build threads");
  solve->add_option("--report", config.report_path, "JSON report path");
  solve->add_option("--csv", config.csv_path, "CSV report path");
  solve->add_option("--series", series_text, "Comma-separated list of levels");
  solve->add_option("--targets", targets_text, "Evaluation points x1,y1;x2,y2");
  solve->add_option("--convection", convection, "Convection magnitude override");
  solve->add_flag("--paper-scale", paper_scale, "Use the original convection magnitudes");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  auto* list = app.add_subcommand("problems", "List builtin problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*list) {
      for (const auto& name : hps::builtin_problem_names()) std::cout << name << '\n';
      return 0;
    }
    if (*run) {
      std::ifstream in(config_path);
      std::stringstream text;
      text << in.rdbuf();
      return execute(hps::parse_config(text.str()));
    }
    config.params.kappa = kappa;
    config.params.convection = convection;
    config.params.paper_scale = paper_scale;
    config.switch_threshold = parse_switch(switch_text);
    if (!series_text.empty()) config.series = parse_series(series_text);
    if (!targets_text.empty()) config.targets = parse_targets(targets_text);
    if (config.q < 3) throw hps::ConfigError("q must be at least 3");
    if (!(config.eps > 0.0 && config.eps < 1.0)) throw hps::ConfigError("tol must lie in (0, 1)");
    return execute(config);
  } catch (const hps::ResonanceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
