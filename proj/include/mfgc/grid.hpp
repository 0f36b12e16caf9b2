#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfgc/geometry.hpp"

namespace mfg {

/// Domain shape: a union of axis-aligned rectangles with pairwise disjoint
/// interiors (they may share edges).
struct Shape {
  std::vector<Rect> rects;

  static Shape rectangle(double x0, double x1, double y0, double y1) { return Shape{{Rect{x0, x1, y0, y1}}}; }
  double area() const;
  bool contains(Vec2 p) const;
};

enum class MaskKind { inside, hull };

/// Pixel raster of the domain and of its convex hull. Pixel (ix, iy) has its
/// center at (x0 + (ix + 1/2)/res, y0 + (iy + 1/2)/res).
class GridDomain {
 public:
  GridDomain() = default;

  const Shape &shape() const { return shape_; }
  const ConvexPolygon &hull() const { return hull_; }
  const Rect &bounds() const { return bounds_; }
  double resolution() const { return resolution_; }
  double pixel_size() const { return 1.0 / resolution_; }
  double pixel_area() const { return pixel_size() * pixel_size(); }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx_ + ix; }

  Vec2 pixel_center(int ix, int iy) const {
    return {bounds_.x0 + (ix + 0.5) * pixel_size(), bounds_.y0 + (iy + 0.5) * pixel_size()};
  }
  Vec2 pixel_center(std::size_t idx) const {
    return pixel_center(static_cast<int>(idx % nx_), static_cast<int>(idx / nx_));
  }

  bool inside(std::size_t idx) const { return inside_mask_[idx] != 0; }
  bool in_hull(std::size_t idx) const { return hull_mask_[idx] != 0; }
  bool masked(std::size_t idx, MaskKind m) const { return m == MaskKind::inside ? inside(idx) : in_hull(idx); }
  const std::vector<std::uint8_t> &inside_mask() const { return inside_mask_; }
  const std::vector<std::uint8_t> &hull_mask() const { return hull_mask_; }

  /// Pixel-count areas.
  double inside_area() const;
  double hull_area() const;

  /// Clamped pixel containing p.
  std::pair<int, int> locate(Vec2 p) const;

 private:
  friend GridDomain build_grid(const Shape &shape, double resolution);

  Shape shape_;
  ConvexPolygon hull_;
  Rect bounds_;
  double resolution_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::uint8_t> inside_mask_;
  std::vector<std::uint8_t> hull_mask_;
};

/// Throws std::invalid_argument on an empty shape, a degenerate or
/// overlapping rectangle, or a non-positive resolution.
GridDomain build_grid(const Shape &shape, double resolution);

inline constexpr int kNoOwner = -1;

struct CellAssignment {
  std::vector<int> owner;
  std::vector<double> cost_at_owner;
};

/// Laguerre ownership of every masked pixel center: owner = argmin_i
/// |x - y_i|^2 / (2 eps) - phi_i, lowest index on ties. OpenMP over rows.
CellAssignment assign_cells(const GridDomain &grid, std::span<const Vec2> positions, std::span<const double> weights,
                            double epsilon, MaskKind mask);

/// Sequential full-scan reference; assign_cells must agree bit for bit.
CellAssignment assign_cells_serial(const GridDomain &grid, std::span<const Vec2> positions,
                                   std::span<const double> weights, double epsilon, MaskKind mask);

}  // namespace mfg
