#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace mfg {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 &operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2 &operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Closed axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool empty() const { return !(x1 > x0 && y1 > y0); }
};

/// Half-plane {x : dot(normal, x) <= offset}. `tag` records where the
/// constraint came from so that clipped edges can be attributed.
struct HalfPlane {
  Vec2 normal;
  double offset = 0.0;
  int tag = -1;
};

/// Edge tags below zero mark non-Laguerre boundaries.
inline constexpr int kDomainEdge = -1;
inline constexpr int kBoxEdge = -2;

/// Convex polygon, counter-clockwise. edge_tag[k] labels the edge from
/// vertex k to vertex k+1.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
  std::vector<int> edge_tag;

  bool empty() const { return vertices.size() < 3; }
  double area() const;
  bool contains(Vec2 p) const;

  static ConvexPolygon from_rect(const Rect &r, int tag = kDomainEdge);
  /// Convex hull (monotone chain) of a point cloud.
  static ConvexPolygon hull_of(std::vector<Vec2> points, int tag = kDomainEdge);
};

/// Sutherland-Hodgman step against one half-plane.
ConvexPolygon clip(const ConvexPolygon &poly, const HalfPlane &hp);

double distance_to_polygon(const ConvexPolygon &poly, Vec2 p);
/// p itself when inside, otherwise the nearest boundary point.
Vec2 closest_point(const ConvexPolygon &poly, Vec2 p);

}  // namespace mfg
