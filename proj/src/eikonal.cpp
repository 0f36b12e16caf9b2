#include "mfgc/eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

namespace mfg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr double kMinInitPixels = 2.0;

}  // namespace

std::vector<double> speed_map(const GridDomain &grid, double speed_inside, double speed_outside) {
  std::vector<double> speed(grid.pixel_count());
  for (std::size_t k = 0; k < speed.size(); ++k) speed[k] = grid.inside(k) ? speed_inside : speed_outside;
  return speed;
}

double upwind_update(double a, double b, double step_cost) {
  if (a > b) std::swap(a, b);
  if (b == kInf || b - a >= step_cost) return a + step_cost;
  const double diff = b - a;
  return 0.5 * (a + b + std::sqrt(2.0 * step_cost * step_cost - diff * diff));
}

MarchResult march_from(const GridDomain &grid, std::span<const double> speed, Vec2 source,
                       const MarchOptions &options) {
  const int nx = grid.nx();
  const int ny = grid.ny();
  const double h = grid.pixel_size();
  MarchResult res;
  res.values.assign(grid.pixel_count(), kInf);
  std::vector<std::uint8_t> accepted(grid.pixel_count(), 0);

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;

  const auto [sx, sy] = grid.locate(source);
  const std::size_t src = grid.index(sx, sy);
  const double src_slowness = 1.0 / speed[src];
  const double radius = std::max(kMinInitPixels, options.init_radius / h);
  const int rad = static_cast<int>(std::ceil(radius));
  // straight segment from the source pixel stays at the source speed
  auto visible = [&](int ix, int iy) {
    const int steps = 4 * (std::abs(ix - sx) + std::abs(iy - sy));
    for (int s = 1; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int jx = static_cast<int>(std::lround(sx + t * (ix - sx)));
      const int jy = static_cast<int>(std::lround(sy + t * (iy - sy)));
      if (speed[grid.index(jx, jy)] != speed[src]) return false;
    }
    return true;
  };
  std::vector<Item> init;
  for (int iy = std::max(0, sy - rad); iy <= std::min(ny - 1, sy + rad); ++iy)
    for (int ix = std::max(0, sx - rad); ix <= std::min(nx - 1, sx + rad); ++ix) {
      const double dist = std::hypot(ix - sx, iy - sy);
      const std::size_t k = grid.index(ix, iy);
      if (dist > radius || speed[k] != speed[src] || !visible(ix, iy)) continue;
      init.emplace_back(dist * h * src_slowness, k);
    }
  std::sort(init.begin(), init.end());
  for (const auto &[v, k] : init) {
    res.values[k] = v;
    accepted[k] = 1;
    res.order.push_back(k);
  }
  res.frozen = res.order.size();

  auto relax = [&](int ix, int iy) {
    const std::size_t k = grid.index(ix, iy);
    if (accepted[k]) return;
    auto val = [&](int jx, int jy) {
      if (jx < 0 || jy < 0 || jx >= nx || jy >= ny) return kInf;
      const std::size_t j = grid.index(jx, jy);
      return accepted[j] ? res.values[j] : kInf;
    };
    const double a = std::min(val(ix - 1, iy), val(ix + 1, iy));
    const double b = std::min(val(ix, iy - 1), val(ix, iy + 1));
    const double u = upwind_update(a, b, h / speed[k]);
    if (u < res.values[k]) {
      res.values[k] = u;
      heap.emplace(u, k);
    }
  };
  auto relax_neighbors = [&](std::size_t k) {
    const int ix = static_cast<int>(k % nx);
    const int iy = static_cast<int>(k / nx);
    if (ix > 0) relax(ix - 1, iy);
    if (ix + 1 < nx) relax(ix + 1, iy);
    if (iy > 0) relax(ix, iy - 1);
    if (iy + 1 < ny) relax(ix, iy + 1);
  };

  for (std::size_t n = 0; n < res.frozen; ++n) relax_neighbors(res.order[n]);
  while (!heap.empty()) {
    const auto [v, k] = heap.top();
    heap.pop();
    if (accepted[k] || v > res.values[k]) continue;
    accepted[k] = 1;
    res.order.push_back(k);
    relax_neighbors(k);
  }
  return res;
}

PotentialField fast_march(const GridDomain &grid, double speed_inside, double speed_outside,
                          std::span<const Vec2> sources, const MarchOptions &options) {
  if (!(speed_inside > 0.0) || !(speed_outside > 0.0))
    throw std::invalid_argument("fast_march: speeds must be positive");
  if (sources.empty()) throw std::invalid_argument("fast_march: no sources");
  const Rect &b = grid.bounds();
  for (const Vec2 &s : sources)
    if (!b.contains(s)) throw std::invalid_argument("fast_march: source outside the grid");

  PotentialField field;
  field.bounds = b;
  field.resolution = grid.resolution();
  field.nx = grid.nx();
  field.ny = grid.ny();
  field.speed = speed_map(grid, speed_inside, speed_outside);
  field.speed_outside = speed_outside;
  field.sources.assign(sources.begin(), sources.end());
  field.values.assign(grid.pixel_count(), kInf);
  for (const Vec2 &s : sources) {
    const MarchResult r = march_from(grid, field.speed, s, options);
    for (std::size_t k = 0; k < r.values.size(); ++k) field.values[k] = std::min(field.values[k], r.values[k]);
  }
  return field;
}

PotentialSample sample_potential(const PotentialField &field, Vec2 p) {
  const Rect &b = field.bounds;
  const double h = field.pixel_size();
  if (!(p.x >= b.x0 && p.y >= b.y0 && p.x <= b.x0 + field.nx * h && p.y <= b.y0 + field.ny * h))
    throw std::out_of_range("sample_potential: point outside the field");

  auto node = [&](int ix, int iy) { return field.values[field.index(ix, iy)]; };
  auto node_grad = [&](int ix, int iy) {
    Vec2 g;
    if (field.nx > 1) {
      const int l = std::max(ix - 1, 0), r = std::min(ix + 1, field.nx - 1);
      g.x = (node(r, iy) - node(l, iy)) / ((r - l) * h);
    }
    if (field.ny > 1) {
      const int d = std::max(iy - 1, 0), u = std::min(iy + 1, field.ny - 1);
      g.y = (node(ix, u) - node(ix, d)) / ((u - d) * h);
    }
    return g;
  };

  // continuous index relative to pixel centers, clamped to the node range
  const double fx = std::clamp((p.x - b.x0) / h - 0.5, 0.0, static_cast<double>(field.nx - 1));
  const double fy = std::clamp((p.y - b.y0) / h - 0.5, 0.0, static_cast<double>(field.ny - 1));
  const int ix = std::min(static_cast<int>(fx), std::max(field.nx - 2, 0));
  const int iy = std::min(static_cast<int>(fy), std::max(field.ny - 2, 0));
  const int jx = std::min(ix + 1, field.nx - 1);
  const int jy = std::min(iy + 1, field.ny - 1);
  const double tx = fx - ix, ty = fy - iy;
  const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty), w01 = (1 - tx) * ty, w11 = tx * ty;

  PotentialSample s;
  s.value = w00 * node(ix, iy) + w10 * node(jx, iy) + w01 * node(ix, jy) + w11 * node(jx, jy);
  s.gradient = w00 * node_grad(ix, iy) + w10 * node_grad(jx, iy) + w01 * node_grad(ix, jy) + w11 * node_grad(jx, jy);
  return s;
}

Rect node_rect(const PotentialField &f) {
  const Vec2 lo = f.pixel_center(0, 0), hi = f.pixel_center(f.nx - 1, f.ny - 1);
  return {lo.x, hi.x, lo.y, hi.y};
}

PotentialSample sample_potential_smooth(const PotentialField &field, Vec2 p) {
  const Rect r = node_rect(field);
  if (!(p.x >= r.x0 && p.x <= r.x1 && p.y >= r.y0 && p.y <= r.y1))
    throw std::out_of_range("sample_potential_smooth: point outside the node rectangle");
  const double h = field.pixel_size();
  const int nx = field.nx, ny = field.ny;
  auto v = [&](int ix, int iy) { return field.values[field.index(ix, iy)]; };
  // slopes per node step (not per unit length)
  auto dx = [&](int ix, int iy) {
    if (nx < 2) return 0.0;
    const int l = std::max(ix - 1, 0), rr = std::min(ix + 1, nx - 1);
    return (v(rr, iy) - v(l, iy)) / (rr - l);
  };
  auto dy = [&](int ix, int iy) {
    if (ny < 2) return 0.0;
    const int d = std::max(iy - 1, 0), u = std::min(iy + 1, ny - 1);
    return (v(ix, u) - v(ix, d)) / (u - d);
  };
  auto dxy = [&](int ix, int iy) {
    if (ny < 2) return 0.0;
    const int d = std::max(iy - 1, 0), u = std::min(iy + 1, ny - 1);
    return (dx(ix, u) - dx(ix, d)) / (u - d);
  };

  const double fx = (p.x - r.x0) / h, fy = (p.y - r.y0) / h;
  const int ix = std::clamp(static_cast<int>(fx), 0, std::max(nx - 2, 0));
  const int iy = std::clamp(static_cast<int>(fy), 0, std::max(ny - 2, 0));
  const int jx = std::min(ix + 1, nx - 1), jy = std::min(iy + 1, ny - 1);
  const double t = nx > 1 ? std::clamp(fx - ix, 0.0, 1.0) : 0.0;
  const double u = ny > 1 ? std::clamp(fy - iy, 0.0, 1.0) : 0.0;

  // Hermite basis: [value at 0, value at 1, slope at 0, slope at 1] and derivatives
  auto basis = [](double s, double out[4], double der[4]) {
    const double s2 = s * s, s3 = s2 * s;
    out[0] = 2 * s3 - 3 * s2 + 1, out[1] = -2 * s3 + 3 * s2, out[2] = s3 - 2 * s2 + s, out[3] = s3 - s2;
    der[0] = 6 * s2 - 6 * s, der[1] = -6 * s2 + 6 * s, der[2] = 3 * s2 - 4 * s + 1, der[3] = 3 * s2 - 2 * s;
  };
  double bx[4], dbx[4], by[4], dby[4];
  basis(t, bx, dbx);
  basis(u, by, dby);

  const int cx[2] = {ix, jx}, cy[2] = {iy, jy};
  double value = 0.0, gt = 0.0, gu = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int X = cx[a], Y = cy[b];
      const double f = v(X, Y), fxn = dx(X, Y), fyn = dy(X, Y), fxy = dxy(X, Y);
      value += f * bx[a] * by[b] + fxn * bx[2 + a] * by[b] + fyn * bx[a] * by[2 + b] + fxy * bx[2 + a] * by[2 + b];
      gt += f * dbx[a] * by[b] + fxn * dbx[2 + a] * by[b] + fyn * dbx[a] * by[2 + b] + fxy * dbx[2 + a] * by[2 + b];
      gu += f * bx[a] * dby[b] + fxn * bx[2 + a] * dby[b] + fyn * bx[a] * dby[2 + b] + fxy * bx[2 + a] * dby[2 + b];
    }
  return {value, {nx > 1 ? gt / h : 0.0, ny > 1 ? gu / h : 0.0}};
}

}  // namespace mfg
