// mfgc: command-line front end.
//
//   mfgc run <config> [--out DIR] [--frames STRIDE] [--density]
//   mfgc moreau <config> <points.csv> [--out DIR] [--epsilon E]
//   mfgc eikonal <config> [--out DIR]
//   mfgc check-grad <config> [--step H] [--seed S] [--particles N] [--steps M]
//   mfgc sweep <plan> [--out DIR] [--workers K]
//
// MFGC_THREADS sets the OpenMP thread count.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfgc/errors.hpp"
#include "mfgc/experiments.hpp"
#include "mfgc/scenario.hpp"

namespace fs = std::filesystem;
using namespace mfg;

namespace {

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_input:
      return 2;
    case ErrorCode::feasibility:
      return 3;
    case ErrorCode::io:
      return 4;
    case ErrorCode::stalled:
      return 5;
    case ErrorCode::line_search_failure:
      return 6;
  }
  return 1;
}

void apply_thread_env() {
  const char *env = std::getenv("MFGC_THREADS");
  if (!env || !*env) return;
  char *end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096)
    throw SolverError(ErrorCode::invalid_input, std::string("MFGC_THREADS must be a positive integer, got '") + env + "'");
  omp_set_num_threads(static_cast<int>(n));
}

fs::path out_dir_or(const std::string &given, const std::string &fallback) {
  return given.empty() ? fs::path(fallback) : fs::path(given);
}

void write_file(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw SolverError(ErrorCode::io, "cannot write " + p.string());
}

void make_dir(const fs::path &p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw SolverError(ErrorCode::io, "cannot create " + p.string() + ": " + ec.message());
}

int cmd_run(const std::string &config, const std::string &out, int frames, bool density) {
  ScenarioConfig c = load_config(config);
  if (frames >= 0) c.frame_stride = frames;
  if (density) c.write_density = true;
  const fs::path dir = out_dir_or(out, c.output_dir);
  const Scenario s = build_scenario(c);
  const RunResult r = run_scenario(s, &dir);
  const EnergyBreakdown &e = r.report.final_energy;
  std::printf("%s: %s after %d iterations (%d evaluations)\n", c.name.c_str(), to_string(r.report.reason).c_str(),
              r.report.iterations, r.report.evaluations);
  std::printf("energy %s = kinetic %s + congestion %s + running %s + terminal %s\n", format_number(e.total).c_str(),
              format_number(e.kinetic).c_str(), format_number(e.congestion).c_str(),
              format_number(e.running_potential).c_str(), format_number(e.terminal_potential).c_str());
  std::printf("max density %s, outside fraction %s, max hull distance %s\n",
              format_number(r.diagnostics.max_density).c_str(), format_number(r.diagnostics.outside_fraction).c_str(),
              format_number(r.diagnostics.max_hull_distance).c_str());
  std::printf("outputs in %s\n", dir.string().c_str());
  return r.report.reason == Termination::line_search_failure ? exit_code(ErrorCode::line_search_failure) : 0;
}

int cmd_moreau(const std::string &config, const std::string &points, const std::string &out, double eps) {
  const ScenarioConfig c = load_config(config);
  const std::vector<Vec2> pts = read_points(points);
  if (pts.empty()) throw SolverError(ErrorCode::invalid_input, "no points in " + points);
  const GridDomain grid = build_grid(c.shape, c.resolution);
  const MoreauProblem problem(grid, c.congestion, eps > 0 ? eps : c.epsilon, c.quadrature);
  const DiscreteMeasure mu{pts, c.total_mass / static_cast<double>(pts.size())};
  const MoreauSolution sol = solve_dual(problem, mu, std::nullopt, SolveOptions{c.dual_tol, c.dual_max_iters});

  const fs::path dir = out_dir_or(out, c.output_dir + "/moreau");
  make_dir(dir);
  write_cells_csv(dir / "cells.csv", mu, sol);
  write_file(dir / "cells.svg", render_cells_svg(problem, sol, mu, true));
  std::printf("value %s\nresidual %s\niterations %d (%s)\nmax density %s\noutputs in %s\n",
              format_number(sol.value).c_str(), format_number(sol.residual).c_str(), sol.iterations,
              sol.status == SolveStatus::converged ? "converged" : "stalled", format_number(sol.max_density).c_str(),
              dir.string().c_str());
  return sol.status == SolveStatus::converged ? 0 : exit_code(ErrorCode::stalled);
}

int cmd_eikonal(const std::string &config, const std::string &out) {
  const ScenarioConfig c = load_config(config);
  if (c.terminal.kind != "eikonal")
    throw SolverError(ErrorCode::invalid_input, "terminal potential of " + config + " is not of kind eikonal");
  const GridDomain grid = build_grid(c.shape, c.resolution);
  const PotentialField f = fast_march(grid, c.terminal.speed_inside, c.terminal.speed_outside, c.terminal.sources);
  const fs::path dir = out_dir_or(out, c.output_dir + "/eikonal");
  make_dir(dir);
  write_potential_csv(dir / "potential.csv", f);
  write_file(dir / "potential.svg", render_potential_svg(f, c.shape));
  double hi = 0.0;
  for (double v : f.values) hi = std::max(hi, v);
  std::printf("grid %dx%d, max Phi %s\noutputs in %s\n", f.nx, f.ny, format_number(hi).c_str(), dir.string().c_str());
  return 0;
}

int cmd_check_grad(const std::string &config, double step, unsigned seed, int particles, int steps) {
  ScenarioConfig c = load_config(config);
  if (particles > 0) {
    c.total_mass *= static_cast<double>(particles) / c.particles;
    c.particles = particles;
  }
  if (steps > 0) c.steps = steps;
  const Scenario s = build_scenario(c);
  const double err = check_gradient(initial_ensemble(s), s.context, step, seed);
  std::printf("max relative error %s (step %s, N=%d, M=%d)\n", format_number(err).c_str(),
              format_number(step).c_str(), c.particles, c.steps);
  return 0;
}

int cmd_sweep(const std::string &plan_path, const std::string &out, int workers) {
  SweepPlan plan = load_plan(plan_path);
  if (workers > 0) plan.workers = workers;
  const fs::path dir = out_dir_or(out, plan.base.output_dir + "/sweep");
  const SweepReport rep = run_sweep(plan, &dir);
  std::fputs(rep.summary.c_str(), stdout);
  std::printf("outputs in %s\n", dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Variational mean-field-game solver with Moreau-envelope congestion"};
  app.require_subcommand(1);

  std::string config, points, plan, out;
  int frames = -1, particles = 0, steps = 0, workers = 0;
  bool density = false;
  double eps = 0.0, step = 1e-4;
  unsigned seed = 1;

  auto *run = app.add_subcommand("run", "Optimize a scenario and write its outputs");
  run->add_option("config", config, "Scenario config (.cfg)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (default: output.directory of the config)");
  run->add_option("--frames", frames, "Write frame_<k>.svg every STRIDE slices (0 disables)")->check(CLI::NonNegativeNumber);
  run->add_flag("--density", density, "Also write density_<k>.csv next to each frame");

  auto *moreau = app.add_subcommand("moreau", "Solve one Moreau projection for a point set");
  moreau->add_option("config", config, "Scenario config: domain, congestion, epsilon, total mass")->required()->check(CLI::ExistingFile);
  moreau->add_option("points", points, "CSV of x,y rows")->required()->check(CLI::ExistingFile);
  moreau->add_option("--out", out, "Output directory");
  moreau->add_option("--epsilon", eps, "Override epsilon")->check(CLI::PositiveNumber);

  auto *eik = app.add_subcommand("eikonal", "Fast-march the terminal travel-time potential");
  eik->add_option("config", config, "Scenario config with an eikonal terminal potential")->required()->check(CLI::ExistingFile);
  eik->add_option("--out", out, "Output directory");

  auto *cg = app.add_subcommand("check-grad", "Finite-difference check of the energy gradient at the initial ensemble");
  cg->add_option("config", config, "Scenario config")->required()->check(CLI::ExistingFile);
  cg->add_option("--step", step, "Central-difference step")->check(CLI::PositiveNumber);
  cg->add_option("--seed", seed, "Coordinate sampling seed");
  cg->add_option("--particles", particles, "Override particle count (mass per particle kept)")->check(CLI::PositiveNumber);
  cg->add_option("--steps", steps, "Override time steps")->check(CLI::PositiveNumber);

  auto *sw = app.add_subcommand("sweep", "Run a parameter sweep against a reference run");
  sw->add_option("plan", plan, "Sweep plan (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "Output directory");
  sw->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    apply_thread_env();
    if (*run) return cmd_run(config, out, frames, density);
    if (*moreau) return cmd_moreau(config, points, out, eps);
    if (*eik) return cmd_eikonal(config, out);
    if (*cg) return cmd_check_grad(config, step, seed, particles, steps);
    if (*sw) return cmd_sweep(plan, out, workers);
  } catch (const SolverError &e) {
    std::fprintf(stderr, "mfgc: %s error: %s\n", to_string(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception &e) {
    std::fprintf(stderr, "mfgc: %s\n", e.what());
    return 1;
  }
  return 1;
}
