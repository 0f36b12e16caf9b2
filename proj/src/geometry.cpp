#include "mfgc/geometry.hpp"

#include <algorithm>
#include <limits>

namespace mfg {

double ConvexPolygon::area() const {
  double a = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t k = 0; k < n; ++k) a += cross(vertices[k], vertices[(k + 1) % n]);
  return 0.5 * a;
}

bool ConvexPolygon::contains(Vec2 p) const {
  if (empty()) return false;
  const std::size_t n = vertices.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = vertices[k];
    const Vec2 b = vertices[(k + 1) % n];
    if (cross(b - a, p - a) < -1e-12 * (1.0 + norm2(b - a))) return false;
  }
  return true;
}

ConvexPolygon ConvexPolygon::from_rect(const Rect &r, int tag) {
  ConvexPolygon p;
  p.vertices = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
  p.edge_tag.assign(4, tag);
  return p;
}

ConvexPolygon ConvexPolygon::hull_of(std::vector<Vec2> pts, int tag) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  ConvexPolygon hull;
  if (pts.size() < 3) {
    hull.vertices = pts;
    hull.edge_tag.assign(pts.size(), tag);
    return hull;
  }
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2 &p : pts) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], p - h[k - 2]) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  hull.vertices = std::move(h);
  hull.edge_tag.assign(hull.vertices.size(), tag);
  return hull;
}

ConvexPolygon clip(const ConvexPolygon &poly, const HalfPlane &hp) {
  ConvexPolygon out;
  const std::size_t n = poly.vertices.size();
  if (n == 0) return out;
  out.vertices.reserve(n + 1);
  out.edge_tag.reserve(n + 1);
  auto side = [&](Vec2 p) { return dot(hp.normal, p) - hp.offset; };
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = poly.vertices[k];
    const Vec2 b = poly.vertices[(k + 1) % n];
    const double sa = side(a);
    const double sb = side(b);
    const int tag = poly.edge_tag[k];
    if (sa <= 0.0) {
      out.vertices.push_back(a);
      if (sb <= 0.0) {
        out.edge_tag.push_back(tag);
      } else {
        // leaving: a..x keeps the old tag, x..(next entry) lies on the clip line
        const double t = sa / (sa - sb);
        out.edge_tag.push_back(tag);
        out.vertices.push_back(a + t * (b - a));
        out.edge_tag.push_back(hp.tag);
      }
    } else if (sb <= 0.0) {
      const double t = sa / (sa - sb);
      out.vertices.push_back(a + t * (b - a));
      out.edge_tag.push_back(tag);
    }
  }
  if (out.vertices.size() < 3) {
    out.vertices.clear();
    out.edge_tag.clear();
  }
  return out;
}

Vec2 closest_point(const ConvexPolygon &poly, Vec2 p) {
  if (poly.contains(p)) return p;
  Vec2 best = p;
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.vertices.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = poly.vertices[k];
    const Vec2 b = poly.vertices[(k + 1) % n];
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * ab;
    if (norm2(p - q) < best_d) {
      best_d = norm2(p - q);
      best = q;
    }
  }
  return best;
}

double distance_to_polygon(const ConvexPolygon &poly, Vec2 p) { return norm(p - closest_point(poly, p)); }

}  // namespace mfg
