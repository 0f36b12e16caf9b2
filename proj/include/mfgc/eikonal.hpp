#pragma once

#include <span>
#include <vector>

#include "mfgc/geometry.hpp"
#include "mfgc/grid.hpp"

namespace mfg {

/// Travel-time potential on the pixel grid: |grad Phi| = 1 / speed, with
/// speed_inside on the domain and speed_outside elsewhere.
struct PotentialField {
  Rect bounds;
  double resolution = 0.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;
  std::vector<double> speed;
  double speed_outside = 1.0;  ///< also governs the extension beyond the bounds
  std::vector<Vec2> sources;

  double pixel_size() const { return 1.0 / resolution; }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }
  Vec2 pixel_center(int ix, int iy) const {
    return {bounds.x0 + (ix + 0.5) * pixel_size(), bounds.y0 + (iy + 0.5) * pixel_size()};
  }
};

/// Pixels closer to the snapped source than max(2 pixels, init_radius), and
/// seen from it through a constant-speed straight segment, start from the
/// exact straight-line travel time. A radius fixed in domain units removes
/// the log h loss of point-source marching.
struct MarchOptions {
  double init_radius = 0.1;
};

/// One single-source fast march; `order` lists pixels in acceptance order and
/// the first `frozen` of them were initialized directly around the source.
struct MarchResult {
  std::vector<double> values;
  std::vector<std::size_t> order;
  std::size_t frozen = 0;
};

/// Per-pixel speeds for a grid: speed_inside on inside pixels, speed_outside
/// everywhere else.
std::vector<double> speed_map(const GridDomain &grid, double speed_inside, double speed_outside);

MarchResult march_from(const GridDomain &grid, std::span<const double> speed, Vec2 source,
                       const MarchOptions &options = {});

/// First-order fast marching on the 4-neighbor upwind stencil. Several
/// sources give the pointwise minimum of the single-source solutions.
/// Throws std::invalid_argument for non-positive speeds or a source outside
/// the grid bounds.
PotentialField fast_march(const GridDomain &grid, double speed_inside, double speed_outside,
                          std::span<const Vec2> sources, const MarchOptions &options = {});

/// The local upwind update used by the march (exposed for causality checks).
double upwind_update(double a, double b, double step_cost);

struct PotentialSample {
  double value = 0.0;
  Vec2 gradient;
};

/// Bilinear interpolation of Phi and of its node-wise central-difference
/// gradient (one-sided on the outermost pixels). Throws std::out_of_range
/// outside the field bounds.
PotentialSample sample_potential(const PotentialField &field, Vec2 p);

/// Bicubic Hermite interpolation through the pixel-center nodes with the
/// same central-difference slopes (and their cross difference). C^1, and the
/// returned gradient is the exact derivative of the returned value, which is
/// what a line search needs. Defined on the node rectangle only
/// [center of pixel (0,0), center of pixel (nx-1,ny-1)]; throws
/// std::out_of_range elsewhere.
PotentialSample sample_potential_smooth(const PotentialField &field, Vec2 p);

/// The node rectangle of a field.
Rect node_rect(const PotentialField &field);

}  // namespace mfg
