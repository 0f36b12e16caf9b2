// Serial reference kernels against their OpenMP versions. The /threads
// argument of the parallel cases is passed to omp_set_num_threads.

#include <omp.h>

#include <benchmark/benchmark.h>

#include <random>

#include "mfgc/energy.hpp"
#include "mfgc/laguerre.hpp"
#include "mfgc/moreau.hpp"

using namespace mfg;

namespace {

struct Setup {
  GridDomain grid = build_grid(Shape::rectangle(-1, 10, -1, 10), 16);
  CongestionModel model = CongestionModel::hard_cap(1.0);
  double eps = 0.02;
  MoreauProblem problem{grid, model, eps};
  DiscreteMeasure mu;
  std::vector<double> weights;

  explicit Setup(int n) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 9.0);
    for (int i = 0; i < n; ++i) mu.positions.push_back({u(rng), u(rng)});
    mu.mass = 10.0 / n;
    weights = solve_dual(problem, mu).weights;
  }

  IntegrationRequest request() const {
    return {problem.pieces(), radial_profile(model), mu.positions, weights, eps, true};
  }
};

const Setup &setup() {
  static const Setup s(400);
  return s;
}

void BM_assign_cells_serial(benchmark::State &st) {
  const Setup &s = setup();
  for (auto _ : st)
    benchmark::DoNotOptimize(assign_cells_serial(s.grid, s.mu.positions, s.weights, s.eps, MaskKind::inside));
}

void BM_assign_cells_omp(benchmark::State &st) {
  const Setup &s = setup();
  omp_set_num_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(assign_cells(s.grid, s.mu.positions, s.weights, s.eps, MaskKind::inside));
}

void BM_integrate_cells_serial(benchmark::State &st) {
  const Setup &s = setup();
  const IntegrationRequest req = s.request();
  for (auto _ : st) benchmark::DoNotOptimize(integrate_cells_serial(req));
}

void BM_integrate_cells_omp(benchmark::State &st) {
  const Setup &s = setup();
  const IntegrationRequest req = s.request();
  omp_set_num_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(integrate_cells(req));
}

// slice-parallel energy; threads = 1 is the serial reference
void BM_energy_evaluate(benchmark::State &st) {
  const Setup &s = setup();
  std::vector<Vec2> start(s.mu.positions.begin(), s.mu.positions.begin() + 64);
  const TrajectoryEnsemble ens = TrajectoryEnsemble::stationary(start, 1.6 / 64, 5.0, 16);
  EnergyContext ctx;
  ctx.grid = &s.grid;
  ctx.model = s.model;
  ctx.epsilon = s.eps;
  ctx.potential.terminal = {PotentialKind::quadratic, {10, 6}, 0.0, 1.0};
  omp_set_num_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(evaluate(ens, ctx, nullptr));
}

}  // namespace

BENCHMARK(BM_assign_cells_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_cells_omp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_integrate_cells_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_integrate_cells_omp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_energy_evaluate)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
