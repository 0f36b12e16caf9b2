#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfgc/scenario.hpp"

namespace mfg {

enum class EpsSchedule {
  log_over_n,  ///< eps = scale * ln N / N
  power_law,   ///< eps = scale * N^(-2/d)
  manual,
};

struct SweepEntry {
  int particles = 0;
  int steps = 0;
  double epsilon = 0.0;  ///< used as given for manual plans, filled in otherwise
};

struct SweepPlan {
  ScenarioConfig base;
  EpsSchedule schedule = EpsSchedule::log_over_n;
  double scale = 1.0;
  double dimension = 2.0;
  std::vector<SweepEntry> runs;
  SweepEntry reference;
  bool convergence = false;  ///< also run projection_convergence
  int workers = 1;

  /// Fills epsilons from the schedule; throws SolverError(invalid_input) when
  /// runs are not sorted by N or an entry is malformed.
  void resolve();
  /// delta^(2/r') / eps for each run, which should decrease along the list.
  std::vector<double> schedule_ratios() const;
  double epsilon_for(int particles) const;
};

/// JSON plan: {"base": path-or-object, "schedule": {"rule", "scale",
/// "dimension"}, "runs": [{"particles", "steps", "epsilon"?}], "reference":
/// {...}, "convergence": bool, "workers": int}. Relative base paths resolve
/// against the plan file.
SweepPlan load_plan(const std::filesystem::path &path);

struct SweepRow {
  SweepEntry entry;
  double delta = 0.0;
  bool ok = false;
  std::string error;
  int iterations = 0;
  Termination reason = Termination::max_iters;
  double kinetic = 0.0, congestion = 0.0, running_potential = 0.0, terminal_potential = 0.0, total = 0.0;
  double w2_to_reference = 0.0;  ///< time-averaged over compared slices
};

struct SweepRun {
  SweepEntry entry;
  Scenario scenario;
  RunResult result;
};

struct SweepReport {
  std::vector<SweepRow> rows;  ///< plan order
  SweepRow reference;
  std::vector<double> schedule_ratios;
  std::string summary;
};

/// Time-resampled pixel density of a run: interior slice fields, linear in
/// time between slices. Empty when t falls outside the interior slice range.
std::optional<DensityField> density_at(const SweepRun &run, const std::vector<DensityField> &slices, double t);

/// W_2 between a pixel density and a uniform discrete measure of the same
/// mass, by ascent on the semi-discrete Kantorovich dual with pixel
/// quadrature (no congestion term).
double semi_discrete_w2(const GridDomain &grid, const DensityField &density, const DiscreteMeasure &measure);

/// Interior-slice projected densities of a finished run.
std::vector<DensityField> slice_densities(const SweepRun &run);

SweepRun execute(const ScenarioConfig &base, const SweepEntry &entry);

/// Runs every entry and the reference (failures are recorded, the sweep
/// continues) and writes sweep.csv and summary.txt when out_dir is given.
SweepReport run_sweep(SweepPlan plan, const std::filesystem::path *out_dir = nullptr,
                      std::vector<SweepRun> *runs_out = nullptr);

struct ConvergenceRow {
  int particles = 0;
  double epsilon = 0.0;
  double exponent = 2.0;               ///< p of the L^p norm
  double lp_error = 0.0;               ///< over time and space
  double congestion_integral = 0.0;    ///< delta sum_k int f(rho_k)
  double congestion_gap = 0.0;         ///< vs the reference on the same times
};

/// Strong-convergence table of finished runs against the reference run.
/// Requires a quadratic or power model and identical grids.
std::vector<ConvergenceRow> projection_convergence(const std::vector<SweepRun> &runs, const SweepRun &reference);
void write_convergence_csv(const std::filesystem::path &path, const std::vector<ConvergenceRow> &rows);

std::string to_string(EpsSchedule s);
EpsSchedule eps_schedule_from_string(const std::string &name);

}  // namespace mfg
