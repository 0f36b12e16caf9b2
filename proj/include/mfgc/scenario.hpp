#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "mfgc/energy.hpp"
#include "mfgc/optimizer.hpp"

namespace mfg {

/// Analytic term, or (terminal only) a travel-time field.
struct PotentialSpec {
  std::string kind = "zero";  ///< zero | quadratic | ring_well | eikonal
  Vec2 center;
  double radius = 0.0;
  double scale = 1.0;
  double speed_inside = 1.0;
  double speed_outside = 1.0;
  std::vector<Vec2> sources;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Shape shape;
  double resolution = 8.0;
  CongestionModel congestion;
  PotentialSpec running;
  PotentialSpec terminal;
  int particles = 1;
  double total_mass = 1.0;
  Rect layout;
  double lagrangian_exponent = 2.0;
  double horizon = 1.0;
  int steps = 1;
  double epsilon = 0.1;
  OptimizerConfig optimizer;
  double dual_tol = 1e-9;
  int dual_max_iters = 500;
  Quadrature quadrature = Quadrature::exact;
  std::string output_dir = "out";
  int frame_stride = 0;  ///< 0 disables frames
  bool write_density = false;

  double particle_mass() const { return total_mass / particles; }
  double delta() const { return horizon / steps; }
  /// Throws SolverError(invalid_input) or SolverError(feasibility).
  void validate() const;
};

/// Reads the JSON schema documented in the README. A missing or null
/// optimizer.grad_tol resolves to 1e-5 * total_mass. Throws SolverError(io)
/// on unreadable or unparsable files and validates the result.
ScenarioConfig load_config(const std::filesystem::path &path);
ScenarioConfig parse_config(const std::string &text);
std::string dump_config(const ScenarioConfig &config);
void save_config(const ScenarioConfig &config, const std::filesystem::path &path);

/// Row-major grid over the layout rectangle including its edges; n columns
/// with n = ceil(sqrt(N)) and as many rows as needed, last row left-aligned.
/// N = 1 is the rectangle center.
std::vector<Vec2> layout_points(const Rect &layout, int count);

/// Everything the solver needs, built once from a config.
struct Scenario {
  ScenarioConfig config;
  std::shared_ptr<const GridDomain> grid;
  EnergyContext context;
};

Scenario build_scenario(const ScenarioConfig &config);
TrajectoryEnsemble initial_ensemble(const Scenario &scenario);

struct RunDiagnostics {
  double max_density = 0.0;         ///< over interior slices, pixel field
  double outside_fraction = 0.0;    ///< trajectory samples outside the domain
  double max_hull_distance = 0.0;   ///< farthest sample from conv(domain)
};

RunDiagnostics diagnose(const Scenario &scenario, const TrajectoryEnsemble &ensemble, const EnergyBreakdown &energy);

struct RunResult {
  TrajectoryEnsemble ensemble;
  OptimizeReport report;
  RunDiagnostics diagnostics;
};

/// Optimizes from the initial ensemble. With an output directory, streams
/// energy.csv during the run and writes the remaining outputs at the end.
RunResult run_scenario(const Scenario &scenario, const std::filesystem::path *out_dir = nullptr);

/// Streams the optimizer trace:
/// iteration,kinetic,congestion,running_potential,terminal_potential,total,grad_sup
class EnergyCsv {
 public:
  explicit EnergyCsv(const std::filesystem::path &path);
  void row(int iteration, const EnergyBreakdown &energy);

 private:
  std::ofstream out_;
};

std::string format_number(double v);

void write_trajectories_csv(const std::filesystem::path &path, const TrajectoryEnsemble &ensemble);
void write_trajectories_svg(const std::filesystem::path &path, const Scenario &scenario,
                            const TrajectoryEnsemble &ensemble);

/// Laguerre cells by owner color, charged support (class "charged"), the
/// particles, and optionally arrows from each particle to its barycenter.
std::string render_cells_svg(const MoreauProblem &problem, const MoreauSolution &solution,
                             const DiscreteMeasure &measure, bool arrows);
void write_density_csv(const std::filesystem::path &path, const DensityField &density);

/// Same grid layout as the density CSV.
void write_potential_csv(const std::filesystem::path &path, const PotentialField &field);
/// Heatmap of Phi, dark = small, with the domain outline and the sources.
std::string render_potential_svg(const PotentialField &field, const Shape &shape);

/// id,x,y,weight,cell_mass,barycenter_x,barycenter_y,gradient_x,gradient_y
void write_cells_csv(const std::filesystem::path &path, const DiscreteMeasure &measure,
                     const MoreauSolution &solution);

/// trajectories.csv, trajectories.svg, frame_<k>.svg every frame_stride
/// interior slices, density_<k>.csv alongside when requested, summary.json.
void write_outputs(const std::filesystem::path &dir, const Scenario &scenario, const RunResult &result);

/// Reads "x,y" rows; a non-numeric first line is taken as a header.
std::vector<Vec2> read_points(const std::filesystem::path &path);

}  // namespace mfg
