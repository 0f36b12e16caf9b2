#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mfgc/errors.hpp"
#include "mfgc/optimizer.hpp"

using namespace mfg;

namespace {

// First-order conditions of w sum |x^{k+1}-x^k|^2/(2 delta) + w s |x^M - a|^2
// along one coordinate, solved by the Thomas algorithm.
std::vector<double> lq_solution(double x0, double a, double s, double delta, int m) {
  std::vector<double> lower(m, -1.0), diag(m, 2.0), upper(m, -1.0), rhs(m, 0.0);
  rhs[0] = x0;
  diag[m - 1] = 1.0 + 2.0 * s * delta;
  rhs[m - 1] += 2.0 * s * delta * a;
  for (int k = 1; k < m; ++k) {
    const double f = lower[k] / diag[k - 1];
    diag[k] -= f * upper[k - 1];
    rhs[k] -= f * rhs[k - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = rhs[m - 1] / diag[m - 1];
  for (int k = m - 2; k >= 0; --k) x[k] = (rhs[k] - upper[k] * x[k + 1]) / diag[k];
  return x;
}

}  // namespace

TEST_CASE("linear-quadratic problem matches the tridiagonal solution") {
  const int M = 12;
  const Vec2 x0{0.5, -1.0}, a{4.0, 3.0};
  const double scale = 0.7, T = 3.0;
  EnergyContext ctx;
  ctx.congestion = false;
  ctx.potential.terminal = {PotentialKind::quadratic, a, 0.0, scale};
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-9;
  const TrajectoryEnsemble start = TrajectoryEnsemble::stationary({x0}, 0.25, T, M);
  const OptimizeResult r = minimize(start, ctx, cfg);
  CHECK(r.report.reason == Termination::converged);
  const auto ex = lq_solution(x0.x, a.x, scale, T / M, M);
  const auto ey = lq_solution(x0.y, a.y, scale, T / M, M);
  for (int k = 1; k <= M; ++k) {
    CHECK(std::abs(r.ensemble.at(k, 0).x - ex[k - 1]) < 1e-6);
    CHECK(std::abs(r.ensemble.at(k, 0).y - ey[k - 1]) < 1e-6);
  }
  CHECK(r.ensemble.at(0, 0) == x0);
  for (std::size_t n = 1; n < r.report.objective_history.size(); ++n)
    CHECK(r.report.objective_history[n] <= r.report.objective_history[n - 1]);
}

TEST_CASE("stationary start at a minimum terminates immediately") {
  EnergyContext ctx;
  ctx.congestion = false;
  ctx.potential.terminal = {PotentialKind::quadratic, {1.0, 1.0}, 0.0, 1.0};
  const TrajectoryEnsemble start = TrajectoryEnsemble::stationary({{1.0, 1.0}, {1.0, 1.0}}, 0.5, 1.0, 4);
  const OptimizeResult r = minimize(start, ctx, {});
  CHECK(r.report.reason == Termination::converged);
  CHECK(r.report.iterations == 0);
  CHECK(r.report.objective_history.size() == 1);
}

TEST_CASE("congested descent is monotone and deterministic") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 4, 0, 4), 8);
  EnergyContext ctx;
  ctx.grid = &grid;
  ctx.epsilon = 0.05;
  ctx.potential.terminal = {PotentialKind::quadratic, {3.0, 2.0}, 0.0, 1.0};
  std::vector<Vec2> layout;
  for (int iy = 0; iy < 3; ++iy)
    for (int ix = 0; ix < 3; ++ix) layout.push_back({0.5 + 0.4 * ix, 1.5 + 0.4 * iy});
  const TrajectoryEnsemble start = TrajectoryEnsemble::stationary(layout, 0.1, 1.0, 4);
  OptimizerConfig cfg;
  cfg.max_iters = 25;
  std::vector<int> seen;
  const OptimizeResult a = minimize(start, ctx, cfg, [&](int it, const TrajectoryEnsemble &, const EnergyBreakdown &) {
    seen.push_back(it);
  });
  const OptimizeResult b = minimize(start, ctx, cfg);
  CHECK(a.report.iterations >= 10);
  CHECK(seen.size() == a.report.objective_history.size());
  for (std::size_t n = 1; n < a.report.objective_history.size(); ++n)
    CHECK(a.report.objective_history[n] <= a.report.objective_history[n - 1]);
  CHECK(a.ensemble.positions == b.ensemble.positions);
  CHECK(a.report.objective_history == b.report.objective_history);
  CHECK(a.report.final_energy.total == a.report.objective_history.back());
}

TEST_CASE("check_gradient") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.4, 2.6);
  const GridDomain grid = build_grid(Shape::rectangle(0, 3, 0, 3), 8);
  EnergyContext ctx;
  ctx.grid = &grid;
  ctx.epsilon = 0.1;
  ctx.potential.running = {PotentialKind::ring_well, {1.5, 1.5}, 1.0, 0.5};
  ctx.potential.terminal = {PotentialKind::quadratic, {2.0, 2.0}, 0.0, 1.0};
  TrajectoryEnsemble e;
  e.steps = 4;
  e.particles = 5;
  e.mass = 0.2;
  e.horizon = 1.0;
  for (int n = 0; n < 25; ++n) e.positions.push_back({u(rng), u(rng)});
  CHECK(check_gradient(e, ctx, 1e-4) < 1e-3);
  ctx.congestion = false;
  CHECK(check_gradient(e, ctx, 1e-4) < 1e-7);
  e.at(2, 3) = e.at(2, 1);
  CHECK_THROWS_AS(check_gradient(e, ctx, 1e-4), SolverError);
}

TEST_CASE("optimizer configuration") {
  OptimizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.wolfe_c1 = 0.95;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(init_strategy_from_string(to_string(InitStrategy::straight_to_target)) == InitStrategy::straight_to_target);
  CHECK(to_string(Termination::line_search_failure) == "line_search_failure");
}
