#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfgc/energy.hpp"

namespace mfg {

enum class InitStrategy { stationary, straight_to_target };
enum class Termination { converged, max_iters, line_search_failure };

struct OptimizerConfig {
  int memory = 10;
  int max_iters = 2000;
  double grad_tol = 1e-5;  ///< sup-norm of dJ/dx
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;  ///< trial steps per line search
  InitStrategy init_strategy = InitStrategy::stationary;

  /// Throws std::invalid_argument unless 0 < c1 < c2 < 1 and the counts are positive.
  void validate() const;
};

struct OptimizeReport {
  int iterations = 0;
  int evaluations = 0;
  EnergyBreakdown final_energy;
  std::vector<double> objective_history;  ///< accepted iterates, starting point first
  std::vector<double> grad_norm_history;
  Termination reason = Termination::max_iters;
};

struct OptimizeResult {
  TrajectoryEnsemble ensemble;
  OptimizeReport report;
};

/// Called after the starting point (iteration 0) and after every accepted step.
using IterationCallback = std::function<void(int iteration, const TrajectoryEnsemble &, const EnergyBreakdown &)>;

/// L-BFGS (two-loop recursion) on slices 1..M with a strong-Wolfe line
/// search. Slice 0 never moves. Returns the last accepted iterate, which is
/// also the best one since every accepted step decreases J.
OptimizeResult minimize(const TrajectoryEnsemble &start, const EnergyContext &ctx, const OptimizerConfig &config,
                        const IterationCallback &callback = {});

/// Worst relative error between the analytic gradient and central
/// differences with the given step, over a seeded random subset of at least
/// `min_coords` free coordinates (all of them when there are fewer).
/// Relative error is |fd - g| / max(|g|, |fd|, 1e-6 max(1, |grad|_inf)).
/// Throws SolverError(invalid_input) when two particles of a slice are closer
/// than 2 * step.
double check_gradient(const TrajectoryEnsemble &ensemble, const EnergyContext &ctx, double step,
                      std::uint64_t seed = 1, int min_coords = 50);

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string &name);
std::string to_string(Termination t);

}  // namespace mfg
