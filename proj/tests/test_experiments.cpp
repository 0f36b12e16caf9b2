#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfgc/errors.hpp"
#include "mfgc/experiments.hpp"

using namespace mfg;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny(CongestionModel model) {
  ScenarioConfig c;
  c.name = "tiny";
  c.shape = Shape::rectangle(0, 3, 0, 2);
  c.resolution = 8;
  c.congestion = model;
  c.terminal.kind = "quadratic";
  c.terminal.center = {2.5, 1};
  c.particles = 4;
  c.total_mass = 0.8;
  c.layout = {0.4, 1.0, 0.6, 1.4};
  c.horizon = 1.0;
  c.steps = 3;
  c.epsilon = 0.05;
  c.optimizer.max_iters = 15;
  c.optimizer.grad_tol = 1e-6;
  c.validate();
  return c;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("schedule resolution") {
  SweepPlan plan;
  plan.base = tiny(CongestionModel::quadratic(1.0));
  plan.runs = {{4, 3}, {9, 6}};
  plan.reference = {16, 12};
  plan.resolve();
  CHECK(plan.runs[0].epsilon == doctest::Approx(std::log(4.0) / 4));
  CHECK(plan.reference.epsilon == doctest::Approx(std::log(16.0) / 16));
  const auto r = plan.schedule_ratios();
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx((1.0 / 3) / (std::log(4.0) / 4)));

  plan.schedule = EpsSchedule::power_law;
  plan.scale = 2.0;
  plan.resolve();
  CHECK(plan.runs[1].epsilon == doctest::Approx(2.0 / 9));

  plan.runs = {{9, 6}, {4, 3}};
  CHECK_THROWS_AS(plan.resolve(), SolverError);
  CHECK_THROWS_AS(eps_schedule_from_string("cubic"), SolverError);
}

TEST_CASE("semi-discrete W2 against a 1-d split") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 2, 0, 1), 32);
  DensityField rho;
  rho.bounds = grid.bounds();
  rho.nx = grid.nx();
  rho.ny = grid.ny();
  rho.pixel_area = grid.pixel_area();
  rho.values.assign(grid.pixel_count(), 0.0);
  for (std::size_t k = 0; k < grid.pixel_count(); ++k)
    if (grid.inside(k)) rho.values[k] = 1.0;

  // equal masses split the strip at x = 1; the y spread adds 1/12 per unit mass
  const DiscreteMeasure mu{{{0.3, 0.5}, {1.5, 0.5}}, 1.0};
  const double a = 0.3, b = 1.5;
  const double x_part = (std::pow(1 - a, 3) + std::pow(a, 3)) / 3 + (std::pow(2 - b, 3) + std::pow(b - 1, 3)) / 3;
  const double expected = std::sqrt(x_part + 2.0 / 12);
  CHECK(semi_discrete_w2(grid, rho, mu) == doctest::Approx(expected).epsilon(5e-3));

  const DiscreteMeasure one{{{1.0, 0.5}}, 2.0};
  CHECK(semi_discrete_w2(grid, rho, one) == doctest::Approx(std::sqrt(2.0 * (4.0 / 12 + 1.0 / 12))).epsilon(5e-3));
}

TEST_CASE("time resampling") {
  const SweepRun run = execute(tiny(CongestionModel::quadratic(1.0)), {4, 4, 0.05});
  const auto slices = slice_densities(run);
  REQUIRE(slices.size() == 3);
  const double d = run.result.ensemble.delta();
  CHECK_FALSE(density_at(run, slices, 0.5 * d).has_value());
  CHECK_FALSE(density_at(run, slices, 3.5 * d).has_value());
  CHECK(density_at(run, slices, 3 * d)->values == slices[2].values);
  const auto mid = density_at(run, slices, 1.5 * d);
  REQUIRE(mid.has_value());
  for (std::size_t k = 0; k < mid->values.size(); k += 7)
    CHECK(mid->values[k] == doctest::Approx(0.5 * (slices[0].values[k] + slices[1].values[k])));
}

TEST_CASE("projection convergence") {
  const ScenarioConfig base = tiny(CongestionModel::quadratic(1.0));
  const SweepRun coarse = execute(base, {4, 3, 0.08});
  const SweepRun ref = execute(base, {9, 6, 0.04});

  const auto self = projection_convergence({ref}, ref);
  REQUIRE(self.size() == 1);
  CHECK(self[0].lp_error == 0.0);
  CHECK(self[0].congestion_gap == 0.0);
  CHECK(self[0].exponent == 2.0);

  const auto rows = projection_convergence({coarse}, ref);
  CHECK(rows[0].lp_error > 0.0);
  CHECK(rows[0].congestion_integral > 0.0);

  // rho^2/2 either way
  const ScenarioConfig pbase = tiny(CongestionModel::power(2.0));
  const auto prows = projection_convergence({execute(pbase, {4, 3, 0.08})}, execute(pbase, {9, 6, 0.04}));
  CHECK(prows[0].lp_error == doctest::Approx(rows[0].lp_error));
  CHECK(prows[0].congestion_gap == doctest::Approx(rows[0].congestion_gap));

  const SweepRun hard = execute(tiny(CongestionModel::hard_cap(1.0)), {4, 3, 0.08});
  CHECK_THROWS_AS(projection_convergence({hard}, hard), SolverError);

  ScenarioConfig fine = base;
  fine.resolution = 16;
  CHECK_THROWS_WITH_AS(projection_convergence({coarse}, execute(fine, {4, 3, 0.08})),
                       doctest::Contains("mismatched grids"), SolverError);
}

TEST_CASE("sweep outputs") {
  SweepPlan plan;
  plan.base = tiny(CongestionModel::quadratic(1.0));
  plan.runs = {{4, 3}, {9, 3}};
  plan.reference = {9, 3};
  plan.convergence = true;
  const fs::path dir = fs::temp_directory_path() / "mfgc_test_sweep";
  fs::remove_all(dir);
  std::vector<SweepRun> runs;
  const SweepReport rep = run_sweep(plan, &dir, &runs);
  REQUIRE(rep.rows.size() == 2);
  CHECK(runs.size() == 3);
  CHECK(rep.rows[0].ok);
  CHECK(rep.reference.ok);
  CHECK(rep.rows[1].total == rep.reference.total);

  // a one-entry sweep matches a plain run
  const SweepRun plain = execute(plan.base, {4, 3, std::log(4.0) / 4});
  CHECK(rep.rows[0].total == plain.result.report.final_energy.total);
  CHECK(rep.rows[0].iterations == plain.result.report.iterations);

  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.rfind("role,particles,steps,epsilon,delta,status,iterations,termination,kinetic", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir / "convergence.csv"));
  CHECK(slurp(dir / "summary.txt").find("L^p projection error") != std::string::npos);

  const fs::path again = fs::temp_directory_path() / "mfgc_test_sweep2";
  fs::remove_all(again);
  run_sweep(plan, &again);
  CHECK(slurp(again / "sweep.csv") == csv);
}

TEST_CASE("plan files") {
  const fs::path dir = fs::temp_directory_path() / "mfgc_test_plan";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_config(tiny(CongestionModel::quadratic(1.0)), dir / "base.cfg");
  {
    std::ofstream out(dir / "plan.json");
    out << R"({"base": "base.cfg", "schedule": {"rule": "manual"},
              "runs": [{"particles": 4, "steps": 3, "epsilon": 0.1}], "workers": 2})";
  }
  const SweepPlan plan = load_plan(dir / "plan.json");
  CHECK(plan.runs[0].epsilon == 0.1);
  CHECK(plan.reference.particles == 4);
  CHECK(plan.workers == 2);
  CHECK(plan.base.terminal.center == Vec2{2.5, 1});
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"base": "base.cfg", "runs": [{"particles": 4, "steps": 3}], "extra": 1})";
  }
  CHECK_THROWS_WITH_AS(load_plan(dir / "bad.json"), doctest::Contains("extra"), SolverError);
  {
    std::ofstream out(dir / "noeps.json");
    out << R"({"base": "base.cfg", "schedule": {"rule": "manual"}, "runs": [{"particles": 4, "steps": 3}]})";
  }
  CHECK_THROWS_AS(load_plan(dir / "noeps.json"), SolverError);
}
