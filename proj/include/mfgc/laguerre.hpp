#pragma once

#include <span>
#include <vector>

#include "mfgc/congestion.hpp"
#include "mfgc/geometry.hpp"
#include "mfgc/grid.hpp"

namespace mfg {

/// A convex piece of the integration region carrying a constant density
/// scale. The congestion density on a point x is the sum of the scales of
/// the pieces containing x times the normalized profile (f*)'.
struct IntegrationPiece {
  ConvexPolygon polygon;
  double scale = 1.0;
};

/// Decomposition of the integration region for a model: the domain
/// rectangles for single-region models; the hull with scale outside_cap plus
/// the rectangles with scale cap - outside_cap for the two-region model.
std::vector<IntegrationPiece> integration_pieces(const GridDomain &grid, const CongestionModel &model);

/// Total mass the region can hold (infinite for power and quadratic).
double exact_capacity(const GridDomain &grid, const CongestionModel &model);

struct HessianEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Integrals over the charged Laguerre cells Lag_i(y, phi) n B(y_i, sqrt(2 eps phi_i)).
struct CellIntegrals {
  std::vector<double> mass;       ///< int (f*)'(phi_i - c(x, y_i)) dx
  std::vector<double> conjugate;  ///< int f*(phi_i - c(x, y_i)) dx
  std::vector<Vec2> moment;       ///< int x (f*)'(phi_i - c(x, y_i)) dx
  /// d mass_i / d phi_i, and the off-diagonal entries d mass_i / d phi_j
  /// (row i, col j), grouped by row in increasing order.
  std::vector<double> hessian_diag;
  std::vector<HessianEntry> hessian_offdiag;
};

struct IntegrationRequest {
  std::span<const IntegrationPiece> pieces;
  RadialProfile profile;
  std::span<const Vec2> positions;
  std::span<const double> weights;
  double epsilon = 1.0;
  bool want_hessian = false;
};

/// Exact cell integration, OpenMP over cells. Each cell writes only its own
/// slots, so the result does not depend on the thread count.
CellIntegrals integrate_cells(const IntegrationRequest &req);

/// Single-threaded reference with the same arithmetic.
CellIntegrals integrate_cells_serial(const IntegrationRequest &req);

}  // namespace mfg
