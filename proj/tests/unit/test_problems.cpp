#include "hps/experiment.hpp"
#include "hps/problems.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace hps;

TEST_SUITE("problems") {
  TEST_CASE("builtin catalogue") {
    for (const auto& name : builtin_problem_names()) {
      ProblemParams p;
      p.kappa = 10.0;
      p.levels = 2;
      p.q = 8;
      const ProblemSpec spec = builtin_problem(name, p);
      CHECK(spec.name == name);
      CHECK(static_cast<bool>(spec.boundary));
      CHECK(!spec.description.empty());
    }
    CHECK_THROWS_AS(builtin_problem("poisson"), ConfigError);
    CHECK_THROWS_AS(builtin_problem("helmholtz"), ConfigError);
    CHECK_THROWS_AS(builtin_problem("helmholtz_scaled"), ConfigError);
  }

  TEST_CASE("laplace solution") {
    const ProblemSpec p = builtin_problem("laplace");
    REQUIRE(p.has_exact());
    CHECK(p.exact({0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const auto g = p.exact_gradient({0.0, 0.0});
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(0.0));
  }

  TEST_CASE("helmholtz solution satisfies the equation") {
    const double kappa = 7.0;
    ProblemParams params;
    params.kappa = kappa;
    const ProblemSpec p = builtin_problem("helmholtz", params);
    CHECK(p.coeffs.c({0.3, 0.3}) == doctest::Approx(-kappa * kappa));
    const Point x{0.4, 0.6};
    const double h = 1e-3;
    const double lap = (p.exact({x.x + h, x.y}) + p.exact({x.x - h, x.y}) + p.exact({x.x, x.y + h}) +
                        p.exact({x.x, x.y - h}) - 4.0 * p.exact(x)) /
                       (h * h);
    CHECK(std::abs(lap + kappa * kappa * p.exact(x)) < 1e-4 * kappa * kappa);
    const auto g = p.exact_gradient(x);
    CHECK(g[0] == doctest::Approx((p.exact({x.x + h, x.y}) - p.exact({x.x - h, x.y})) / (2 * h)).epsilon(1e-5));
    CHECK(bessel_y0(1.0) == doctest::Approx(0.088256964215676957983).epsilon(1e-14));
    CHECK(bessel_y1(1.0) == doctest::Approx(-0.78121282130028871655).epsilon(1e-14));
  }

  TEST_CASE("scaled wavenumber") {
    CHECK(scaled_wavenumber(2, 12) == std::floor(2.0 * std::numbers::pi * 4.0));
    CHECK(scaled_wavenumber(0, 12) == 6.0);
  }

  TEST_CASE("convection and variable coefficients") {
    const ProblemSpec dc = builtin_problem("diffusion_convection");
    CHECK(dc.coeffs.c1({0.0, 0.0}) == doctest::Approx(1e3));
    CHECK(dc.coeffs.c2({0.25, 0.0}) == doctest::Approx(-1e3));
    CHECK(!dc.has_exact());
    ProblemParams paper;
    paper.paper_scale = true;
    CHECK(builtin_problem("constant_convection", paper).coeffs.c2({0.5, 0.5}) == 1e5);
    const ProblemSpec vh = builtin_problem("variable_helmholtz");
    CHECK(vh.coeffs.c({0.125, 0.125}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(vh.coeffs.c({0.0, 0.3}) == doctest::Approx(-640.0 * 640.0));
  }
}

TEST_SUITE("experiment") {
  TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(
        R"({"problem": "helmholtz", "kappa": 12, "L": 2, "q": 10, "eps": 1e-8,
            "switch_threshold": "inf", "report_path": "r.json", "targets": [[0.5, 0.5]]})");
    CHECK(c.problem == "helmholtz");
    CHECK(*c.params.kappa == 12.0);
    CHECK(c.levels == 2);
    CHECK(c.q == 10);
    CHECK(c.switch_threshold == SolverOptions::kNeverSwitch);
    REQUIRE(c.targets.size() == 1);
    CHECK(parse_config(R"({"problem": "laplace", "switch_threshold": 0})").switch_threshold == 0);

    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config("[]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"L": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"problem": "laplace", "levels": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"problem": "laplace", "switch_threshold": "never"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"problem": "laplace", "q": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"problem": "laplace", "eps": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"problem": "laplace", "q": "x"})"), ConfigError);
  }

  TEST_CASE("total points") {
    CHECK(total_points(0, 16) == 64 + 256);
    CHECK(total_points(4, 16) == 8704 + 241 * 241);
  }

  TEST_CASE("single leaf report") {
    ExperimentConfig c;
    c.problem = "laplace";
    c.levels = 0;
    c.q = 16;
    const auto reports = run_experiment(c);
    REQUIRE(reports.size() == 1);
    const auto& r = reports[0];
    CHECK(r.N == 64);
    REQUIRE(r.e_pot);
    CHECK(*r.e_pot == 0.0);
    REQUIRE(r.e_grad);
    CHECK(*r.e_grad < 1e-8);
    CHECK(r.dense_merges + r.hbs_merges == 0);
  }

  TEST_CASE("laplace series with loose tolerance") {
    ExperimentConfig c;
    c.problem = "laplace";
    c.q = 12;
    c.eps = 1e-7;
    c.switch_threshold = 0;
    c.series = {2, 3};
    c.targets = {{0.5, 0.5}};
    const auto reports = run_experiment(c);
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
      CHECK(*r.e_pot <= 1e-5);
      CHECK(r.hbs_merges > 0);
      CHECK(r.memory_mb > 0.0);
      CHECK(r.N == (Index{1} << (2 * r.levels + 1)) * 12 + (Index{1} << (r.levels + 1)) * 12);
      REQUIRE(r.target_values.size() == 1);
      CHECK(std::abs(r.target_values[0] - oracle::log_solution({0.5, 0.5})) <= 1e-5);
    }

    const auto doc = nlohmann::json::parse(reports_to_json(reports));
    REQUIRE(doc.at("runs").size() == 2);
    CHECK(doc["runs"][1]["L"] == 3);
    CHECK(doc["runs"][0]["E_pot"].get<double>() == *reports[0].e_pot);
    CHECK(doc["runs"][0]["switch_threshold"] == 0);

    std::istringstream csv(reports_to_csv(reports));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 3);
  }

  TEST_CASE("unknown-solution problems compare against a refined run") {
    ExperimentConfig c;
    c.problem = "diffusion_convection";
    c.params.convection = 10.0;
    c.levels = 2;
    c.q = 10;
    c.switch_threshold = SolverOptions::kNeverSwitch;
    const auto r = run_experiment(c).at(0);
    CHECK(!r.e_pot);
    REQUIRE(r.e_int);
    REQUIRE(r.e_bnd);
    CHECK(*r.e_int < 1e-5);
    CHECK(*r.e_bnd < 1e-2);
    CHECK(*r.e_int > 0.0);
  }
}
