#include "mfgc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfg {

double Shape::area() const {
  double a = 0.0;
  for (const Rect &r : rects) a += r.area();
  return a;
}

bool Shape::contains(Vec2 p) const {
  return std::any_of(rects.begin(), rects.end(), [&](const Rect &r) { return r.contains(p); });
}

double GridDomain::inside_area() const {
  return static_cast<double>(std::count(inside_mask_.begin(), inside_mask_.end(), 1)) * pixel_area();
}

double GridDomain::hull_area() const {
  return static_cast<double>(std::count(hull_mask_.begin(), hull_mask_.end(), 1)) * pixel_area();
}

std::pair<int, int> GridDomain::locate(Vec2 p) const {
  const int ix = static_cast<int>(std::floor((p.x - bounds_.x0) * resolution_));
  const int iy = static_cast<int>(std::floor((p.y - bounds_.y0) * resolution_));
  return {std::clamp(ix, 0, nx_ - 1), std::clamp(iy, 0, ny_ - 1)};
}

GridDomain build_grid(const Shape &shape, double resolution) {
  if (shape.rects.empty()) throw std::invalid_argument("build_grid: empty shape");
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw std::invalid_argument("build_grid: resolution must be positive");
  for (const Rect &r : shape.rects)
    if (r.empty()) throw std::invalid_argument("build_grid: degenerate rectangle");
  for (std::size_t a = 0; a < shape.rects.size(); ++a)
    for (std::size_t b = a + 1; b < shape.rects.size(); ++b) {
      const Rect &p = shape.rects[a];
      const Rect &q = shape.rects[b];
      const double ox = std::min(p.x1, q.x1) - std::max(p.x0, q.x0);
      const double oy = std::min(p.y1, q.y1) - std::max(p.y0, q.y0);
      if (ox > 0.0 && oy > 0.0) throw std::invalid_argument("build_grid: rectangles overlap");
    }

  GridDomain g;
  g.shape_ = shape;
  g.resolution_ = resolution;
  Rect b = shape.rects.front();
  std::vector<Vec2> corners;
  for (const Rect &r : shape.rects) {
    b.x0 = std::min(b.x0, r.x0);
    b.x1 = std::max(b.x1, r.x1);
    b.y0 = std::min(b.y0, r.y0);
    b.y1 = std::max(b.y1, r.y1);
    corners.insert(corners.end(), {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}});
  }
  g.bounds_ = b;
  g.hull_ = ConvexPolygon::hull_of(std::move(corners));
  g.nx_ = std::max(1, static_cast<int>(std::ceil(b.width() * resolution - 1e-9)));
  g.ny_ = std::max(1, static_cast<int>(std::ceil(b.height() * resolution - 1e-9)));
  g.inside_mask_.assign(g.pixel_count(), 0);
  g.hull_mask_.assign(g.pixel_count(), 0);
  for (int iy = 0; iy < g.ny_; ++iy)
    for (int ix = 0; ix < g.nx_; ++ix) {
      const Vec2 c = g.pixel_center(ix, iy);
      const std::size_t k = g.index(ix, iy);
      g.inside_mask_[k] = shape.contains(c) ? 1 : 0;
      g.hull_mask_[k] = (g.inside_mask_[k] || g.hull_.contains(c)) ? 1 : 0;
    }
  return g;
}

namespace {

inline double laguerre_cost(Vec2 x, Vec2 y, double phi, double inv2eps) { return norm2(x - y) * inv2eps - phi; }

void scan_all(Vec2 x, std::span<const Vec2> pos, std::span<const double> phi, double inv2eps, int &owner,
              double &cost) {
  int best = 0;
  double best_cost = laguerre_cost(x, pos[0], phi[0], inv2eps);
  for (std::size_t j = 1; j < pos.size(); ++j) {
    const double c = laguerre_cost(x, pos[j], phi[j], inv2eps);
    if (c < best_cost) {
      best_cost = c;
      best = static_cast<int>(j);
    }
  }
  owner = best;
  cost = best_cost;
}

void check_inputs(std::span<const Vec2> positions, std::span<const double> weights, double epsilon) {
  if (positions.empty()) throw std::invalid_argument("assign_cells: no sites");
  if (positions.size() != weights.size()) throw std::invalid_argument("assign_cells: size mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("assign_cells: epsilon must be positive");
}

/// Uniform buckets over the grid bounds; sites outside the bounds are kept in
/// a separate list that every query scans.
class SiteBuckets {
 public:
  SiteBuckets(const GridDomain &grid, std::span<const Vec2> pos, std::span<const double> phi, double epsilon)
      : pos_(pos), phi_(phi), inv2eps_(0.5 / epsilon) {
    const Rect &b = grid.bounds();
    origin_ = {b.x0, b.y0};
    const double area = std::max(b.area(), 1e-12);
    size_ = std::sqrt(4.0 * area / static_cast<double>(pos.size()));
    nbx_ = std::max(1, static_cast<int>(std::ceil(b.width() / size_)));
    nby_ = std::max(1, static_cast<int>(std::ceil(b.height() / size_)));
    start_.assign(static_cast<std::size_t>(nbx_) * nby_ + 1, 0);
    std::vector<int> bucket_of(pos.size(), -1);
    max_shift_ = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pos.size(); ++j) {
      max_shift_ = std::max(max_shift_, phi[j]);
      const int bx = static_cast<int>(std::floor((pos[j].x - origin_.x) / size_));
      const int by = static_cast<int>(std::floor((pos[j].y - origin_.y) / size_));
      if (bx < 0 || by < 0 || bx >= nbx_ || by >= nby_) {
        far_.push_back(static_cast<int>(j));
        continue;
      }
      bucket_of[j] = by * nbx_ + bx;
      ++start_[bucket_of[j] + 1];
    }
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    items_.resize(start_.back());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t j = 0; j < pos.size(); ++j)
      if (bucket_of[j] >= 0) items_[fill[bucket_of[j]]++] = static_cast<int>(j);
  }

  void query(Vec2 x, int &owner, double &cost) const {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    auto consider = [&](int j) {
      const double c = laguerre_cost(x, pos_[j], phi_[j], inv2eps_);
      if (c < best_cost || (c == best_cost && j < best)) {
        best_cost = c;
        best = j;
      }
    };
    for (int j : far_) consider(j);
    const int cx = std::clamp(static_cast<int>(std::floor((x.x - origin_.x) / size_)), 0, nbx_ - 1);
    const int cy = std::clamp(static_cast<int>(std::floor((x.y - origin_.y) / size_)), 0, nby_ - 1);
    const int max_ring = std::max(nbx_, nby_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      // every site in this ring is at least (ring - 1) * size away
      const double reach = std::max(0, ring - 1) * size_;
      if (best >= 0 && reach * reach * inv2eps_ - max_shift_ > best_cost) break;
      for (int by = cy - ring; by <= cy + ring; ++by) {
        if (by < 0 || by >= nby_) continue;
        const bool edge_row = (by == cy - ring || by == cy + ring);
        for (int bx = cx - ring; bx <= cx + ring; bx += (edge_row ? 1 : 2 * ring)) {
          if (bx >= 0 && bx < nbx_) {
            const int b = by * nbx_ + bx;
            for (int k = start_[b]; k < start_[b + 1]; ++k) consider(items_[k]);
          }
          if (ring == 0) break;
        }
      }
    }
    owner = best;
    cost = best_cost;
  }

 private:
  std::span<const Vec2> pos_;
  std::span<const double> phi_;
  double inv2eps_;
  Vec2 origin_;
  double size_ = 1.0;
  int nbx_ = 1, nby_ = 1;
  double max_shift_ = 0.0;
  std::vector<int> start_;
  std::vector<int> items_;
  std::vector<int> far_;
};

constexpr std::size_t kBucketThreshold = 1024;

}  // namespace

CellAssignment assign_cells_serial(const GridDomain &grid, std::span<const Vec2> positions,
                                   std::span<const double> weights, double epsilon, MaskKind mask) {
  check_inputs(positions, weights, epsilon);
  CellAssignment out;
  out.owner.assign(grid.pixel_count(), kNoOwner);
  out.cost_at_owner.assign(grid.pixel_count(), std::numeric_limits<double>::quiet_NaN());
  const double inv2eps = 0.5 / epsilon;
  for (std::size_t k = 0; k < grid.pixel_count(); ++k) {
    if (!grid.masked(k, mask)) continue;
    scan_all(grid.pixel_center(k), positions, weights, inv2eps, out.owner[k], out.cost_at_owner[k]);
  }
  return out;
}

CellAssignment assign_cells(const GridDomain &grid, std::span<const Vec2> positions, std::span<const double> weights,
                            double epsilon, MaskKind mask) {
  check_inputs(positions, weights, epsilon);
  CellAssignment out;
  out.owner.assign(grid.pixel_count(), kNoOwner);
  out.cost_at_owner.assign(grid.pixel_count(), std::numeric_limits<double>::quiet_NaN());
  const double inv2eps = 0.5 / epsilon;
  const int ny = grid.ny();
  const int nx = grid.nx();
  if (positions.size() <= kBucketThreshold) {
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        const std::size_t k = grid.index(ix, iy);
        if (!grid.masked(k, mask)) continue;
        scan_all(grid.pixel_center(ix, iy), positions, weights, inv2eps, out.owner[k], out.cost_at_owner[k]);
      }
    return out;
  }
  const SiteBuckets buckets(grid, positions, weights, epsilon);
#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t k = grid.index(ix, iy);
      if (!grid.masked(k, mask)) continue;
      buckets.query(grid.pixel_center(ix, iy), out.owner[k], out.cost_at_owner[k]);
    }
  return out;
}

}  // namespace mfg
