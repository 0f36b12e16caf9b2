#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mfgc/congestion.hpp"
#include "mfgc/grid.hpp"
#include "mfgc/laguerre.hpp"

namespace mfg {

/// Uniform discrete measure: every particle carries the same mass.
struct DiscreteMeasure {
  std::vector<Vec2> positions;
  double mass = 0.0;

  std::size_t size() const { return positions.size(); }
  double total_mass() const { return mass * static_cast<double>(positions.size()); }
};

enum class Quadrature {
  exact,  ///< clipped Laguerre polygons, closed-form radial integrals
  pixel,  ///< midpoint rule over pixel centers
};

enum class DualMethod { newton, gradient_ascent };

enum class SolveStatus { converged, stalled };

/// Moreau envelope F_eps(mu) = inf_rho W_2^2(rho, mu) / (2 eps) + F(rho) of a
/// congestion functional, evaluated through its concave dual in the
/// Laguerre weights phi.
class MoreauProblem {
 public:
  MoreauProblem(const GridDomain &grid, CongestionModel model, double epsilon,
                Quadrature quadrature = Quadrature::exact);

  const GridDomain &grid() const { return *grid_; }
  const CongestionModel &model() const { return model_; }
  double epsilon() const { return epsilon_; }
  Quadrature quadrature() const { return quadrature_; }
  MaskKind mask() const { return model_.two_region_model() ? MaskKind::hull : MaskKind::inside; }
  std::span<const IntegrationPiece> pieces() const { return pieces_; }
  /// Mass the integration region can hold, measured with the active quadrature.
  double capacity() const;

 private:
  const GridDomain *grid_;
  CongestionModel model_;
  double epsilon_;
  Quadrature quadrature_;
  std::vector<IntegrationPiece> pieces_;
};

struct MoreauSolution {
  double value = 0.0;
  std::vector<double> weights;
  std::vector<double> cell_mass;
  std::vector<Vec2> barycenter;
  std::vector<Vec2> position_gradient;
  double max_density = 0.0;  ///< NaN when pixel diagnostics were skipped
  double residual = 0.0;     ///< max_i |mass_i - w| / w
  int iterations = 0;
  SolveStatus status = SolveStatus::converged;
};

struct SolveOptions {
  double tol = 1e-3;  ///< stop when max_i |cell_mass_i - w| <= tol * w
  int max_iters = 500;
  DualMethod method = DualMethod::newton;
  bool pixel_diagnostics = true;  ///< fill max_density from the pixel field
};

/// sum_i [w phi_i - int_{Lag_i} f*(phi_i - |x - y_i|^2 / (2 eps)) dx]
double dual_value(const MoreauProblem &problem, const DiscreteMeasure &measure, std::span<const double> weights);

/// d/dphi_i of dual_value: w - cell_mass_i.
std::vector<double> dual_gradient(const MoreauProblem &problem, const DiscreteMeasure &measure,
                                  std::span<const double> weights);

/// Maximizes the dual. Throws SolverError(feasibility) when the total mass
/// does not fit; a run that hits max_iters returns status stalled with its
/// best iterate.
MoreauSolution solve_dual(const MoreauProblem &problem, const DiscreteMeasure &measure,
                          std::optional<std::span<const double>> init = std::nullopt, const SolveOptions &options = {});

/// Weights of isolated ideal cells: each particle alone would carry exactly
/// its mass.
std::vector<double> initial_weights(const MoreauProblem &problem, const DiscreteMeasure &measure);

struct DensityField {
  Rect bounds;
  int nx = 0;
  int ny = 0;
  double pixel_area = 0.0;
  std::vector<double> values;

  double total() const;
  double max() const;
};

/// rho(x) = (f*)'(phi_i - c(x, y_i)) on the owner cell of every masked pixel.
DensityField projected_density(const MoreauProblem &problem, const MoreauSolution &solution,
                               const DiscreteMeasure &measure);

}  // namespace mfg
