#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

#include "mfgc/eikonal.hpp"

using namespace mfg;

namespace {

Shape rooms() {
  return Shape{{Rect{0, 8, 0, 8}, Rect{11, 19, 0, 8}, Rect{8, 11, 3.5, 4.5}}};
}

// Dijkstra on the 8-connected pixel graph; an edge costs its length times
// the mean slowness of its endpoints.
std::vector<double> dijkstra(const GridDomain &grid, const std::vector<double> &speed, Vec2 source) {
  const int nx = grid.nx(), ny = grid.ny();
  const double h = grid.pixel_size();
  std::vector<double> d(grid.pixel_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const auto [sx, sy] = grid.locate(source);
  d[grid.index(sx, sy)] = 0.0;
  pq.emplace(0.0, grid.index(sx, sy));
  while (!pq.empty()) {
    const auto [v, k] = pq.top();
    pq.pop();
    if (v > d[k]) continue;
    const int ix = static_cast<int>(k % nx), iy = static_cast<int>(k / nx);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int jx = ix + dx, jy = iy + dy;
        if ((dx == 0 && dy == 0) || jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
        const std::size_t j = grid.index(jx, jy);
        const double c = std::hypot(dx, dy) * h * 0.5 * (1.0 / speed[k] + 1.0 / speed[j]);
        if (v + c < d[j]) {
          d[j] = v + c;
          pq.emplace(d[j], j);
        }
      }
  }
  return d;
}

double max_error_unit_square(int res) {
  const GridDomain grid = build_grid(Shape::rectangle(0, 1, 0, 1), res);
  const std::vector<Vec2> src{{0.5, 0.5}};
  const PotentialField f = fast_march(grid, 1.0, 1.0, src);
  const auto [sx, sy] = grid.locate(src[0]);
  const Vec2 snapped = grid.pixel_center(sx, sy);
  double err = 0.0;
  for (int iy = 0; iy < grid.ny(); ++iy)
    for (int ix = 0; ix < grid.nx(); ++ix)
      err = std::max(err, std::abs(f.values[grid.index(ix, iy)] - norm(grid.pixel_center(ix, iy) - snapped)));
  return err;
}

}  // namespace

TEST_CASE("straight-line distance from a corner source") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 1, 0, 1), 128);
  const std::vector<Vec2> src{{0.0, 0.0}};
  const PotentialField f = fast_march(grid, 1.0, 1.0, src);
  const double h = grid.pixel_size();
  CHECK(std::abs(f.values[grid.index(grid.nx() - 1, 0)] - 1.0) <= 3 * h);
  for (double v : f.values) CHECK(v >= 0.0);
  CHECK(f.values[grid.index(0, 0)] == 0.0);
}

TEST_CASE("grid convergence order of the march") {
  const double e64 = max_error_unit_square(64);
  const double e128 = max_error_unit_square(128);
  const double e256 = max_error_unit_square(256);
  CHECK(std::log2(e64 / e128) >= 0.8);
  CHECK(std::log2(e128 / e256) >= 0.8);
}

TEST_CASE("several sources give the minimum of single-source fields") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 2, 0, 1), 64);
  const std::vector<Vec2> a{{0.3, 0.2}}, b{{1.6, 0.8}}, both{{0.3, 0.2}, {1.6, 0.8}};
  const PotentialField fa = fast_march(grid, 1.0, 1.0, a);
  const PotentialField fb = fast_march(grid, 1.0, 1.0, b);
  const PotentialField fab = fast_march(grid, 1.0, 1.0, both);
  for (std::size_t k = 0; k < fab.values.size(); ++k) CHECK(fab.values[k] == std::min(fa.values[k], fb.values[k]));
}

TEST_CASE("corridor potential: travel through the corridor beats the slow region") {
  const GridDomain grid = build_grid(rooms(), 8);
  const std::vector<Vec2> src{{18, 1}, {18, 7}};
  const PotentialField f = fast_march(grid, 1.0, 0.1, src);
  CHECK(grid.hull_area() > grid.inside_area());
  // probe far from the corridor mouth in room 1
  const auto [px, py] = grid.locate({1.0, 7.5});
  const double phi = f.values[grid.index(px, py)];
  const double straight = (11.0 - 8.0) / 0.1;  // crossing the gap outside the corridor costs at least this
  CHECK(phi < straight);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2 &s : src) {
    const auto d = dijkstra(grid, f.speed, s);
    best = std::min(best, d[grid.index(px, py)]);
  }
  // 8-connected paths overestimate Euclidean length by at most 1 / cos(pi / 8)
  CHECK(phi <= best * 1.01);
  CHECK(phi >= best / 1.0824 - 0.5);
}

TEST_CASE("raising the outside speed never increases the potential") {
  const GridDomain grid = build_grid(rooms(), 4);
  const std::vector<Vec2> src{{18, 1}};
  const PotentialField slow = fast_march(grid, 1.0, 0.1, src);
  const PotentialField fast = fast_march(grid, 1.0, 0.5, src);
  for (std::size_t k = 0; k < slow.values.size(); ++k) CHECK(fast.values[k] <= slow.values[k]);
}

TEST_CASE("causality: each accepted value is reproduced from earlier neighbors") {
  const GridDomain grid = build_grid(rooms(), 4);
  const std::vector<double> speed = speed_map(grid, 1.0, 0.1);
  const MarchResult r = march_from(grid, speed, {18, 1});
  std::vector<std::uint8_t> done(grid.pixel_count(), 0);
  for (std::size_t n = 0; n < r.frozen; ++n) done[r.order[n]] = 1;
  double last = 0.0;
  for (std::size_t n = r.frozen; n < r.order.size(); ++n) {
    const std::size_t k = r.order[n];
    const int ix = static_cast<int>(k % grid.nx()), iy = static_cast<int>(k / grid.nx());
    auto val = [&](int jx, int jy) {
      if (jx < 0 || jy < 0 || jx >= grid.nx() || jy >= grid.ny()) return std::numeric_limits<double>::infinity();
      const std::size_t j = grid.index(jx, jy);
      return done[j] ? r.values[j] : std::numeric_limits<double>::infinity();
    };
    const double a = std::min(val(ix - 1, iy), val(ix + 1, iy));
    const double b = std::min(val(ix, iy - 1), val(ix, iy + 1));
    CHECK(upwind_update(a, b, grid.pixel_size() / speed[k]) == r.values[k]);
    CHECK(r.values[k] >= last);
    last = r.values[k];
    done[k] = 1;
  }
}

TEST_CASE("sampling the potential") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 4, 0, 4), 32);
  const std::vector<Vec2> src{{2.0, 2.0}};
  const PotentialField f = fast_march(grid, 1.0, 1.0, src);
  SUBCASE("pixel centers are interpolation nodes") {
    for (int k = 3; k < 100; k += 17) {
      const Vec2 c = grid.pixel_center(k, 2 * k % grid.ny());
      CHECK(sample_potential(f, c).value == doctest::Approx(f.values[grid.index(k, 2 * k % grid.ny())]));
    }
  }
  SUBCASE("unit gradient away from the source and the boundary") {
    for (const Vec2 p : {Vec2{0.7, 0.9}, Vec2{3.1, 2.5}, Vec2{2.2, 3.4}, Vec2{1.0, 2.0}}) {
      const Vec2 g = sample_potential(f, p).gradient;
      CHECK(std::abs(norm(g) - 1.0) <= 0.1);
    }
  }
  SUBCASE("degenerate gradient at the source") { CHECK(norm(sample_potential(f, {2.0, 2.0}).gradient) <= 1.0); }
  SUBCASE("outside the bounds") { CHECK_THROWS_AS(sample_potential(f, {4.5, 1.0}), std::out_of_range); }
  SUBCASE("smooth sampler interpolates the nodes and differentiates its own value") {
    for (int k = 3; k < 100; k += 17) {
      const int ix = k, iy = 2 * k % grid.ny();
      CHECK(sample_potential_smooth(f, grid.pixel_center(ix, iy)).value ==
            doctest::Approx(f.values[grid.index(ix, iy)]));
    }
    const double h = 1e-6;
    for (const Vec2 p : {Vec2{0.7, 0.9}, Vec2{2.01, 1.98}, Vec2{3.97, 0.02}}) {
      const PotentialSample s = sample_potential_smooth(f, p);
      const double gx = (sample_potential_smooth(f, p + Vec2{h, 0}).value - sample_potential_smooth(f, p - Vec2{h, 0}).value) / (2 * h);
      const double gy = (sample_potential_smooth(f, p + Vec2{0, h}).value - sample_potential_smooth(f, p - Vec2{0, h}).value) / (2 * h);
      CHECK(gx == doctest::Approx(s.gradient.x).epsilon(1e-6));
      CHECK(gy == doctest::Approx(s.gradient.y).epsilon(1e-6));
    }
    CHECK(std::abs(norm(sample_potential_smooth(f, {3.1, 2.5}).gradient) - 1.0) <= 0.1);
    CHECK_THROWS_AS(sample_potential_smooth(f, {3.99, 1.0}), std::out_of_range);
  }
}

TEST_CASE("bad inputs") {
  const GridDomain grid = build_grid(Shape::rectangle(0, 1, 0, 1), 8);
  const std::vector<Vec2> out{{2.0, 0.5}}, in{{0.5, 0.5}};
  CHECK_THROWS_AS(fast_march(grid, 1.0, 1.0, out), std::invalid_argument);
  CHECK_THROWS_AS(fast_march(grid, 0.0, 1.0, in), std::invalid_argument);
}
