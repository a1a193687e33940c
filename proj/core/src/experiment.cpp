#include "hps/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hps {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Best of a few repetitions; single stages at desk scale are short enough
// for timer noise to matter.
template <class Fn>
double best_time(int reps, Fn&& fn) {
  double best = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const double t = elapsed(t0);
    best = r == 0 ? t : std::min(best, t);
  }
  return best;
}

const Rectangle kUnitSquare{0.0, 1.0, 0.0, 1.0};

struct ProbeValues {
  double u_interior = 0.0;
  double un_boundary = 0.0;
};

ProbeValues probe(const HpsSolver& solver, const Vector& u) {
  // Outward normal at the bottom edge is -e2.
  return {solver.evaluate(u, kInteriorProbe), -solver.gradient(u, kBoundaryProbe)[1]};
}

ProblemParams params_for(const ExperimentConfig& config, int levels) {
  ProblemParams p = config.params;
  p.levels = levels;
  p.q = config.q;
  return p;
}

SolverOptions solver_options(const ExperimentConfig& config) {
  SolverOptions o;
  o.tol = config.eps;
  o.switch_threshold = config.switch_threshold;
  o.threads = config.threads;
  return o;
}

}  // namespace

Index total_points(int levels, int q) {
  const Index side = (Index{1} << levels) * (q - 1) + 1;
  return expected_node_count(levels, q) + side * side;
}

KnownSolutionErrors known_solution_errors(const HpsSolver& solver, const Vector& u,
                                          const ProblemSpec& problem) {
  if (!problem.has_exact() || !problem.exact_gradient)
    throw ConfigError("known-solution metrics need an exact solution and gradient");
  const auto& nodes = solver.nodes();
  KnownSolutionErrors e;
  for (Index k = 0; k < nodes.size(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (nodes.on_boundary[uk]) continue;
    e.e_pot = std::max(e.e_pot, std::abs(u(k) - problem.exact(nodes.points[uk])));
  }
  const Vector f = solver.boundary_values(problem.boundary);
  const Vector v = solver.apply_global_dtn(f);
  const auto& bnd = solver.boundary_nodes();
  for (std::size_t k = 0; k < bnd.size(); ++k) {
    const auto id = static_cast<std::size_t>(bnd[k]);
    const auto g = problem.exact_gradient(nodes.points[id]);
    const double exact = nodes.orientation[id] == EdgeOrientation::vertical ? g[0] : g[1];
    e.e_grad = std::max(e.e_grad, std::abs(v(static_cast<Index>(k)) - exact));
  }
  return e;
}

std::vector<ExperimentReport> run_experiment(const ExperimentConfig& config) {
  std::vector<int> levels = config.series;
  if (levels.empty()) levels.push_back(config.levels);
  for (int L : levels)
    if (L < 0 || L > 12) throw ConfigError("levels must lie in [0, 12]");
  const SolverOptions options = solver_options(config);

  std::vector<ExperimentReport> reports;
  std::map<int, ProbeValues> probes;  // per level, for self-convergence

  for (int L : levels) {
    const ProblemSpec problem = builtin_problem(config.problem, params_for(config, L));
    ExperimentReport rep;
    rep.problem = problem.name;
    rep.description = problem.description;
    rep.kappa = problem.kappa;
    rep.q = config.q;
    rep.levels = L;
    rep.N = expected_node_count(L, config.q);
    rep.N_tot = total_points(L, config.q);
    rep.eps = config.eps;
    rep.switch_threshold = config.switch_threshold;

    const auto t0 = Clock::now();
    const HpsSolver solver(kUnitSquare, L, config.q, problem.coeffs, options);
    rep.t_build = elapsed(t0);

    const Vector f = solver.boundary_values(problem.boundary);
    Vector u;
    rep.t_solve = best_time(3, [&] { u = solver.solve(f); });
    Vector v;
    rep.t_apply = best_time(3, [&] { v = solver.apply_global_dtn(f); });

    const MemoryReport mem = solver.memory_report();
    rep.memory_mb = mem.megabytes;
    rep.ranks = mem.ranks;
    rep.dense_merges = solver.build_stats().dense_merges;
    rep.hbs_merges = solver.build_stats().hbs_merges;

    const ProbeValues pv = probe(solver, u);
    rep.u_interior = pv.u_interior;
    rep.un_boundary = pv.un_boundary;
    probes[L] = pv;

    if (problem.has_exact()) {
      const auto err = known_solution_errors(solver, u, problem);
      rep.e_pot = err.e_pot;
      rep.e_grad = err.e_grad;
    }
    rep.targets = config.targets;
    for (const Point& x : config.targets) rep.target_values.push_back(solver.evaluate(u, x));
    reports.push_back(std::move(rep));
  }

  // Self-convergence against the next finer level (4x the nodes).
  for (auto& rep : reports) {
    if (rep.e_pot) continue;
    const int ref = rep.levels + 1;
    if (!probes.count(ref)) {
      const ProblemSpec problem = builtin_problem(config.problem, params_for(config, ref));
      const HpsSolver solver(kUnitSquare, ref, config.q, problem.coeffs, options);
      probes[ref] = probe(solver, solver.solve(solver.boundary_values(problem.boundary)));
    }
    rep.e_int = std::abs(rep.u_interior - probes[ref].u_interior);
    rep.e_bnd = std::abs(rep.un_boundary - probes[ref].un_boundary);
  }
  return reports;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json switch_json(Index s) {
  return s == SolverOptions::kNeverSwitch ? json("inf") : json(s);
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : ""; }

}  // namespace

std::string reports_to_json(const std::vector<ExperimentReport>& reports) {
  json runs = json::array();
  for (const auto& r : reports) {
    json targets = json::array();
    for (std::size_t k = 0; k < r.targets.size(); ++k)
      targets.push_back({{"x", r.targets[k].x}, {"y", r.targets[k].y}, {"u", r.target_values[k]}});
    runs.push_back({
        {"problem", r.problem},
        {"description", r.description},
        {"kappa", optional_number(r.kappa)},
        {"q", r.q},
        {"L", r.levels},
        {"N", r.N},
        {"N_tot", r.N_tot},
        {"eps", r.eps},
        {"switch_threshold", switch_json(r.switch_threshold)},
        {"T_build", r.t_build},
        {"T_solve", r.t_solve},
        {"T_apply", r.t_apply},
        {"R_MB", r.memory_mb},
        {"E_pot", optional_number(r.e_pot)},
        {"E_grad", optional_number(r.e_grad)},
        {"E_int", optional_number(r.e_int)},
        {"E_bnd", optional_number(r.e_bnd)},
        {"u_interior_probe", r.u_interior},
        {"un_boundary_probe", r.un_boundary},
        {"ranks",
         {{"nodes", r.ranks.nodes},
          {"min", r.ranks.min_rank},
          {"max", r.ranks.max_rank},
          {"mean", r.ranks.mean_rank}}},
        {"dense_merges", r.dense_merges},
        {"hbs_merges", r.hbs_merges},
        {"targets", targets},
    });
  }
  return json{{"runs", runs}}.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  out << "problem,kappa,q,L,N,N_tot,eps,switch_threshold,T_build,T_solve,T_apply,R_MB,"
         "E_pot,E_grad,E_int,E_bnd,u_interior_probe,un_boundary_probe,rank_min,rank_max,"
         "rank_mean\n";
  for (const auto& r : reports) {
    out << r.problem << ',' << csv_optional(r.kappa) << ',' << r.q << ',' << r.levels << ','
        << r.N << ',' << r.N_tot << ',' << csv_number(r.eps) << ','
        << (r.switch_threshold == SolverOptions::kNeverSwitch ? std::string("inf")
                                                              : std::to_string(r.switch_threshold))
        << ',' << csv_number(r.t_build) << ',' << csv_number(r.t_solve) << ','
        << csv_number(r.t_apply) << ',' << csv_number(r.memory_mb) << ','
        << csv_optional(r.e_pot) << ',' << csv_optional(r.e_grad) << ','
        << csv_optional(r.e_int) << ',' << csv_optional(r.e_bnd) << ','
        << csv_number(r.u_interior) << ',' << csv_number(r.un_boundary) << ','
        << r.ranks.min_rank << ',' << r.ranks.max_rank << ',' << csv_number(r.ranks.mean_rank)
        << '\n';
  }
  return out.str();
}

void write_reports(const ExperimentConfig& config, const std::vector<ExperimentReport>& reports) {
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream file(path);
    if (!file) throw ConfigError("cannot open report file '" + path + "'");
    file << text;
    if (!file) throw Error("failed writing report file '" + path + "'");
  };
  if (!config.report_path.empty()) write(config.report_path, reports_to_json(reports));
  if (!config.csv_path.empty()) write(config.csv_path, reports_to_csv(reports));
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "problem", "kappa",   "L",       "q",           "eps",        "switch_threshold",
      "report_path", "csv_path", "series", "targets", "threads", "paper_scale", "convection"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  try {
    if (!doc.contains("problem")) throw ConfigError("config needs 'problem'");
    c.problem = doc.at("problem").get<std::string>();
    if (doc.contains("kappa")) c.params.kappa = doc.at("kappa").get<double>();
    if (doc.contains("paper_scale")) c.params.paper_scale = doc.at("paper_scale").get<bool>();
    if (doc.contains("convection")) c.params.convection = doc.at("convection").get<double>();
    if (doc.contains("L")) c.levels = doc.at("L").get<int>();
    if (doc.contains("q")) c.q = doc.at("q").get<int>();
    if (doc.contains("eps")) c.eps = doc.at("eps").get<double>();
    if (doc.contains("threads")) c.threads = doc.at("threads").get<int>();
    if (doc.contains("switch_threshold")) {
      const auto& s = doc.at("switch_threshold");
      if (s.is_string()) {
        if (s.get<std::string>() != "inf")
          throw ConfigError("switch_threshold must be a number or \"inf\"");
        c.switch_threshold = SolverOptions::kNeverSwitch;
      } else {
        c.switch_threshold = s.get<Index>();
      }
    }
    if (doc.contains("report_path")) c.report_path = doc.at("report_path").get<std::string>();
    if (doc.contains("csv_path")) c.csv_path = doc.at("csv_path").get<std::string>();
    if (doc.contains("series")) c.series = doc.at("series").get<std::vector<int>>();
    if (doc.contains("targets")) {
      for (const auto& t : doc.at("targets")) {
        const auto xy = t.get<std::vector<double>>();
        if (xy.size() != 2) throw ConfigError("targets must be [x, y] pairs");
        c.targets.push_back({xy[0], xy[1]});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  if (c.q < 3) throw ConfigError("q must be at least 3");
  if (!(c.eps > 0.0 && c.eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (c.switch_threshold < 0) throw ConfigError("switch_threshold must be non-negative");
  if (c.threads < 1) throw ConfigError("threads must be positive");
  return c;
}

}  // namespace hps
