// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [criterion numbers...] [--out DIR]
//
// With no numbers every criterion runs. Exit status is 0 only when all of
// the selected criteria pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfgc/eikonal.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/experiments.hpp"
#include "mfgc/scenario.hpp"

using namespace mfg;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MFGC_SOURCE_DIR) / "configs";
fs::path g_out = "acceptance_out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string &name) {
  const fs::path p = g_out / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<Vec2> random_points(std::mt19937_64 &rng, int n, Rect box) {
  std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1);
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back({ux(rng), uy(rng)});
  return pts;
}

double min_pair_distance(const std::vector<Vec2> &p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) d = std::min(d, norm(p[i] - p[j]));
  return d;
}

// ---------------------------------------------------------------- 1

MoreauSolution single_disk(const fs::path *csv_dir) {
  const GridDomain grid = build_grid(Shape::rectangle(0, 10, 0, 10), 128);
  const MoreauProblem problem(grid, CongestionModel::hard_cap(1.0), 0.05);
  const DiscreteMeasure mu{{{5, 5}}, 1.0};
  SolveOptions opt;
  opt.tol = 1e-9;
  const MoreauSolution sol = solve_dual(problem, mu, std::nullopt, opt);
  if (csv_dir) {
    write_cells_csv(*csv_dir / "cells.csv", mu, sol);
    write_density_csv(*csv_dir / "density.csv", projected_density(problem, sol, mu));
  }
  return sol;
}

Outcome criterion1() {
  const fs::path dir = fresh_dir("c1");
  const auto t0 = std::chrono::steady_clock::now();
  const MoreauSolution sol = single_disk(&dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double eps = 0.05, pi = std::numbers::pi;
  const double f_exact = 1.0 / (4 * pi * eps), phi_exact = 1.0 / (2 * pi * eps);
  const double ef = std::abs(sol.value - f_exact) / f_exact;
  const double ep = std::abs(sol.weights[0] - phi_exact) / phi_exact;
  const double eb = norm(sol.barycenter[0] - Vec2{5, 5});
  return {ef < 0.01 && ep < 0.01 && eb < 1e-3 && secs < 5.0, "F=" + fmt("%.6f", sol.value) + " (exact " + fmt("%.6f", f_exact) +
                                                   "), phi=" + fmt("%.6f", sol.weights[0]) + " (exact " +
                                                   fmt("%.6f", phi_exact) + "), |b-y|=" + fmt("%.2e", eb) +
                                                   ", solve " + fmt("%.2f s", secs)};
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  const GridDomain grid = build_grid(Shape::rectangle(0, 5, 0, 5), 16);
  const MoreauProblem problem(grid, CongestionModel::hard_cap(1.0), 0.05);
  double worst = 0.0, slowest = 0.0;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const DiscreteMeasure mu{random_points(rng, 25, Rect{0.5, 4.5, 0.5, 4.5}), 0.2};
    const auto t0 = std::chrono::steady_clock::now();
    const MoreauSolution sol = solve_dual(problem, mu);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    // residual recomputed from scratch at the returned weights
    double r = 0.0;
    for (double g : dual_gradient(problem, mu, sol.weights)) r = std::max(r, std::abs(g));
    worst = std::max(worst, r / mu.mass);
  }
  return {worst <= 1e-3 && slowest < 10.0,
          "max_i |m_i - w| / w = " + fmt("%.2e", worst) + " over 5 configs, slowest solve " + fmt("%.3f s", slowest)};
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  const GridDomain grid = build_grid(Shape::rectangle(0, 2, 0, 2), 8);
  const MoreauProblem problem(grid, CongestionModel::hard_cap(1.0), 0.05);
  const double h = 1e-4;
  SolveOptions opt;
  opt.tol = 1e-12;
  opt.pixel_diagnostics = false;
  double worst = 0.0;
  int used = 0, skipped = 0;
  for (unsigned seed = 1; used < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const DiscreteMeasure mu{random_points(rng, 10, Rect{0.3, 1.7, 0.3, 1.7}), 0.1};
    if (min_pair_distance(mu.positions) < 10 * h) {
      ++skipped;
      continue;
    }
    ++used;
    const MoreauSolution sol = solve_dual(problem, mu, std::nullopt, opt);
    double gmax = 0.0;
    for (const Vec2 &g : sol.position_gradient) gmax = std::max({gmax, std::abs(g.x), std::abs(g.y)});
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (int c = 0; c < 2; ++c) {
        DiscreteMeasure up = mu, dn = mu;
        (c == 0 ? up.positions[i].x : up.positions[i].y) += h;
        (c == 0 ? dn.positions[i].x : dn.positions[i].y) -= h;
        const double fd = (solve_dual(problem, up, sol.weights, opt).value -
                           solve_dual(problem, dn, sol.weights, opt).value) / (2 * h);
        const double an = c == 0 ? sol.position_gradient[i].x : sol.position_gradient[i].y;
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), 1e-3 * gmax}));
      }
  }
  return {worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " over 20 configs (" + std::to_string(skipped) +
                            " rejected for close pairs)"};
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  const GridDomain grid = build_grid(Shape::rectangle(0, 3, 0, 3), 8);
  EnergyContext ctx;
  ctx.grid = &grid;
  ctx.model = CongestionModel::hard_cap();
  ctx.epsilon = 0.1;
  ctx.potential.running = {PotentialKind::ring_well, {1.5, 1.5}, 1.0, 0.3};
  ctx.potential.terminal = {PotentialKind::quadratic, {2.5, 2.0}, 0.0, 1.0};
  // The running potential is quartic, so a central difference at h carries an
  // exact h^2 V'''/6 truncation term; at 1e-4 that alone reaches ~1e-7 relative.
  // The smooth check therefore uses 1e-5; the coarser figures are reported.
  double with = 0.0, without = 0.0, without_1e4 = 0.0, without_1e3 = 0.0;
  for (unsigned seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    TrajectoryEnsemble e;
    e.steps = 4;
    e.particles = 5;
    e.mass = 0.2;
    e.horizon = 1.0;
    for (int k = 0; k <= 4; ++k)
      for (const Vec2 &p : random_points(rng, 5, Rect{0.5, 2.5, 0.5, 2.5})) e.positions.push_back(p);
    ctx.congestion = true;
    with = std::max(with, check_gradient(e, ctx, 1e-4, seed));
    ctx.congestion = false;
    without = std::max(without, check_gradient(e, ctx, 1e-5, seed));
    without_1e4 = std::max(without_1e4, check_gradient(e, ctx, 1e-4, seed));
    without_1e3 = std::max(without_1e3, check_gradient(e, ctx, 1e-3, seed));
  }
  return {with < 1e-3 && without < 1e-7,
          "with congestion " + fmt("%.2e", with) + " (h=1e-4), without " + fmt("%.2e", without) +
              " (h=1e-5; h=1e-4 gives " + fmt("%.2e", without_1e4) + ", h=1e-3 gives " + fmt("%.2e", without_1e3) +
              ", truncation ~h^2) over 3 ensembles"};
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  const GridDomain grid = build_grid(Shape::rectangle(0, 10, 0, 10), 8);
  std::mt19937_64 rng(5);
  const DiscreteMeasure mu{random_points(rng, 10, Rect{3, 7, 3, 7}), 0.5};
  std::vector<double> values;
  std::string detail;
  for (double eps : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const MoreauProblem problem(grid, CongestionModel::hard_cap(1.0), eps);
    const MoreauSolution sol = solve_dual(problem, mu);
    values.push_back(sol.value);
    detail += (detail.empty() ? "" : ", ") + fmt("%.4g", sol.value);
  }
  bool strict = true;
  for (std::size_t k = 1; k < values.size(); ++k) strict = strict && values[k] < values[k - 1];
  const double ratio = values.back() / values.front();
  return {strict && ratio < 0.02, "F_eps = " + detail + "; F_100/F_0.01 = " + fmt("%.2e", ratio)};
}

// ---------------------------------------------------------------- 6

// minimizer of sum_k |x_k - x_{k-1}|^2 / (2 delta) + s |x_M - a|^2 per
// coordinate: tridiagonal normal equations, Thomas sweep
std::vector<double> thomas_lq(double x0, double a, double s, double delta, int m) {
  std::vector<double> sub(m, -1.0), diag(m, 2.0), sup(m, -1.0), rhs(m, 0.0);
  rhs[0] = x0;
  diag[m - 1] = 1.0 + 2.0 * s * delta;
  rhs[m - 1] += 2.0 * s * delta * a;
  for (int k = 1; k < m; ++k) {
    const double f = sub[k] / diag[k - 1];
    diag[k] -= f * sup[k - 1];
    rhs[k] -= f * rhs[k - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (int k = m - 2; k >= 0; --k) x[k] = (rhs[k] - sup[k] * x[k + 1]) / diag[k];
  return x;
}

OptimizeResult lq_run(const fs::path *csv_dir) {
  EnergyContext ctx;
  ctx.congestion = false;
  ctx.potential.terminal = {PotentialKind::quadratic, {4.0, 3.0}, 0.0, 0.7};
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-10;
  std::unique_ptr<EnergyCsv> trace;
  IterationCallback cb;
  if (csv_dir) {
    trace = std::make_unique<EnergyCsv>(*csv_dir / "energy.csv");
    cb = [&](int it, const TrajectoryEnsemble &, const EnergyBreakdown &e) { trace->row(it, e); };
  }
  OptimizeResult r = minimize(TrajectoryEnsemble::stationary({{0.5, -1.0}}, 0.25, 3.0, 12), ctx, cfg, cb);
  if (csv_dir) write_trajectories_csv(*csv_dir / "trajectories.csv", r.ensemble);
  return r;
}

Outcome criterion6() {
  const fs::path dir = fresh_dir("c6");
  const auto t0 = std::chrono::steady_clock::now();
  const OptimizeResult r = lq_run(&dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int m = r.ensemble.steps;
  const auto ex = thomas_lq(0.5, 4.0, 0.7, 3.0 / m, m);
  const auto ey = thomas_lq(-1.0, 3.0, 0.7, 3.0 / m, m);
  double worst = 0.0;
  for (int k = 1; k <= m; ++k)
    worst = std::max({worst, std::abs(r.ensemble.at(k, 0).x - ex[k - 1]), std::abs(r.ensemble.at(k, 0).y - ey[k - 1])});
  return {worst < 1e-6 && secs < 1.0, "max |x - x_tridiag| = " + fmt("%.2e", worst) + ", " + to_string(r.report.reason) + " in " +
                            std::to_string(r.report.iterations) + " iterations, " + fmt("%.3f s", secs)};
}

// ---------------------------------------------------------------- 7

double eikonal_error(int res) {
  const GridDomain grid = build_grid(Shape::rectangle(0, 1, 0, 1), res);
  const std::vector<Vec2> src{{0.3, 0.6}};
  const PotentialField f = fast_march(grid, 1.0, 1.0, src);
  const auto [sx, sy] = grid.locate(src[0]);
  const Vec2 s = grid.pixel_center(sx, sy);
  double err = 0.0;
  for (int iy = 0; iy < grid.ny(); ++iy)
    for (int ix = 0; ix < grid.nx(); ++ix)
      err = std::max(err, std::abs(f.values[grid.index(ix, iy)] - norm(grid.pixel_center(ix, iy) - s)));
  return err;
}

Outcome criterion7() {
  const double e64 = eikonal_error(64), e128 = eikonal_error(128), e256 = eikonal_error(256);
  const double o1 = std::log2(e64 / e128), o2 = std::log2(e128 / e256);

  const GridDomain grid = build_grid(Shape::rectangle(0, 4, 0, 3), 32);
  const std::vector<Vec2> a{{0.5, 0.7}}, b{{3.2, 2.1}}, both{{0.5, 0.7}, {3.2, 2.1}};
  const PotentialField fa = fast_march(grid, 1.0, 1.0, a), fb = fast_march(grid, 1.0, 1.0, b);
  const PotentialField fab = fast_march(grid, 1.0, 1.0, both);
  std::size_t mismatches = 0;
  for (std::size_t k = 0; k < grid.pixel_count(); ++k)
    if (fab.values[k] != std::min(fa.values[k], fb.values[k])) ++mismatches;
  return {std::min(o1, o2) >= 0.8 && mismatches == 0,
          "errors " + fmt("%.3e", e64) + ", " + fmt("%.3e", e128) + ", " + fmt("%.3e", e256) + "; orders " +
              fmt("%.2f", o1) + ", " + fmt("%.2f", o2) + "; two-source mismatches " + std::to_string(mismatches)};
}

// ---------------------------------------------------------------- 8

RunResult square_run(const fs::path &dir) {
  ScenarioConfig c = load_config(kConfigs / "square_scaled.cfg");
  return run_scenario(build_scenario(c), &dir);
}

Outcome criterion8() {
  const ScenarioConfig c = load_config(kConfigs / "square_scaled.cfg");
  const Scenario s = build_scenario(c);
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run_scenario(s, &static_cast<const fs::path &>(fresh_dir("c8")));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto &hist = r.report.objective_history;
  bool monotone = true;
  for (std::size_t n = 1; n < hist.size(); ++n) monotone = monotone && hist[n] <= hist[n - 1];
  const bool terminated = r.report.reason != Termination::line_search_failure;

  const MoreauProblem problem(*s.grid, s.context.model, s.context.epsilon, s.context.quadrature);
  double max_rho = 0.0;
  const auto &slices = r.report.final_energy.per_slice_moreau;
  for (std::size_t k = 0; k < slices.size(); ++k)
    max_rho = std::max(max_rho, projected_density(problem, slices[k], r.ensemble.slice(static_cast<int>(k) + 1)).max());

  int near = 0;
  for (int i = 0; i < r.ensemble.particles; ++i) near += norm(r.ensemble.at(r.ensemble.steps, i) - Vec2{10, 6}) <= 1.5;
  const double frac = static_cast<double>(near) / r.ensemble.particles;
  return {terminated && monotone && max_rho <= 1.02 && frac >= 0.9 && secs < 600.0,
          to_string(r.report.reason) + " after " + std::to_string(r.report.iterations) + " iterations, history " +
              (monotone ? "monotone" : "NOT monotone") + ", max density " + fmt("%.4f", max_rho) + ", " +
              fmt("%.1f%%", 100 * frac) + " end within 1.5 of (10,6), " + fmt("%.0f s", secs)};
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  const ScenarioConfig c = load_config(kConfigs / "corridor_scaled.cfg");
  const Scenario s = build_scenario(c);
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run_scenario(s, &static_cast<const fs::path &>(fresh_dir("c9")));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Rect room2{11, 19, 0, 8};
  int in_room2 = 0;
  for (int i = 0; i < r.ensemble.particles; ++i) in_room2 += room2.contains(r.ensemble.at(r.ensemble.steps, i));
  std::size_t outside = 0;
  for (const Vec2 &p : r.ensemble.positions) outside += !c.shape.contains(p);
  const double frac = static_cast<double>(outside) / static_cast<double>(r.ensemble.positions.size());
  return {in_room2 == r.ensemble.particles && frac <= 0.01 && c.steps <= 64 && secs < 900.0,
          std::to_string(in_room2) + "/" + std::to_string(r.ensemble.particles) + " end in room 2, " +
              fmt("%.3f%%", 100 * frac) + " of samples outside the domain (M=" + std::to_string(c.steps) + ", " +
              to_string(r.report.reason) + " after " + std::to_string(r.report.iterations) + " iterations, " + fmt("%.0f s", secs) + ")"};
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
  const SweepPlan plan = load_plan(kConfigs / "sweep_room.json");
  std::vector<SweepRun> runs;
  const fs::path dir = fresh_dir("c10");
  run_sweep(plan, &dir, &runs);
  if (runs.size() != plan.runs.size() + 1) return {false, "a sweep run failed"};
  const SweepRun ref = runs.back();
  runs.pop_back();
  const auto rows = projection_convergence(runs, ref);
  bool err_ok = true, gap_ok = true;
  std::string errs, gaps;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (n) {
      err_ok = err_ok && rows[n].lp_error <= rows[n - 1].lp_error;
      gap_ok = gap_ok && rows[n].congestion_gap <= rows[n - 1].congestion_gap;
    }
    errs += (n ? ", " : "") + fmt("%.4f", rows[n].lp_error);
    gaps += (n ? ", " : "") + fmt("%.4f", rows[n].congestion_gap);
  }
  return {err_ok && gap_ok, "N=16,64,256 vs 576: L2 error " + errs + "; congestion gap " + gaps};
}

// ---------------------------------------------------------------- 11

std::map<std::string, std::string> csv_files(const fs::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

Outcome criterion11() {
  std::string detail;
  bool ok = true;
  auto compare = [&](const std::string &name, const std::function<void(const fs::path &)> &produce) {
    const fs::path a = fresh_dir("c11/" + name + "_a"), b = fresh_dir("c11/" + name + "_b");
    produce(a);
    produce(b);
    const auto fa = csv_files(a), fb = csv_files(b);
    const bool same = !fa.empty() && fa == fb;
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + name + ": " + std::to_string(fa.size()) + " CSVs " +
              (same ? "identical" : "DIFFER");
  };
  compare("c1", [](const fs::path &d) { single_disk(&d); });
  compare("c6", [](const fs::path &d) { lq_run(&d); });
  compare("c8", [](const fs::path &d) { square_run(d); });
  return {ok, detail};
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10, criterion11};
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--out" && a + 1 < argc) {
      g_out = argv[++a];
    } else {
      const int n = std::atoi(arg.c_str());
      if (n < 1 || n > static_cast<int>(criteria.size())) {
        std::fprintf(stderr, "usage: acceptance [1-%zu ...] [--out DIR]\n", criteria.size());
        return 2;
      }
      selected.insert(n);
    }
  }
  if (selected.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.insert(n);

  int failed = 0;
  for (int n : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d: %s  %s [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
