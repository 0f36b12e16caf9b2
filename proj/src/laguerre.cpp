#include "mfgc/laguerre.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace mfg {

std::vector<IntegrationPiece> integration_pieces(const GridDomain &grid, const CongestionModel &model) {
  std::vector<IntegrationPiece> pieces;
  const auto &rects = grid.shape().rects;
  if (model.two_region_model()) {
    if (model.outside_cap > 0.0) pieces.push_back({grid.hull(), model.outside_cap});
    const double inner = model.cap - model.outside_cap;
    if (inner > 0.0)
      for (const Rect &r : rects) pieces.push_back({ConvexPolygon::from_rect(r), inner});
    return pieces;
  }
  const double scale = model.is_hard() ? model.cap : 1.0;
  for (const Rect &r : rects) pieces.push_back({ConvexPolygon::from_rect(r), scale});
  return pieces;
}

double exact_capacity(const GridDomain &grid, const CongestionModel &model) {
  if (!model.is_hard()) return std::numeric_limits<double>::infinity();
  double cap = 0.0;
  for (const IntegrationPiece &p : integration_pieces(grid, model)) cap += p.scale * p.polygon.area();
  return cap;
}

namespace {

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGaussNodes = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                               0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                 0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                 0.2223810344533745, 0.1012285362903763};

/// Radial antiderivatives G(rho) = int_0^rho g(r) r dr for the profile
/// f*(p) = coef p^q at p = phi - r^2/(2 eps), restricted to the disk.
struct Radial {
  double coef, q, phi, eps;

  double slack(double rho2) const { return std::max(phi - 0.5 * rho2 / eps, 0.0); }

  double mass(double rho2) const { return coef * eps * (std::pow(phi, q) - std::pow(slack(rho2), q)); }
  double mass_out() const { return coef * eps * std::pow(phi, q); }
  double conj(double rho2) const {
    return coef * eps / (q + 1.0) * (std::pow(phi, q + 1.0) - std::pow(slack(rho2), q + 1.0));
  }
  double conj_out() const { return coef * eps / (q + 1.0) * std::pow(phi, q + 1.0); }
  double hess(double rho2) const {
    if (q == 1.0) return 0.0;
    return coef * q * eps * (std::pow(phi, q - 1.0) - std::pow(slack(rho2), q - 1.0));
  }
  double hess_out() const { return coef * q * eps * std::pow(phi, q - 1.0); }
  /// (f*)' at the point.
  double density(double rho2) const {
    const double s = slack(rho2);
    return s > 0.0 ? coef * q * std::pow(s, q - 1.0) : 0.0;
  }
};

struct EdgeSums {
  double mass = 0.0;
  double conj = 0.0;
  double hess = 0.0;
  Vec2 moment;
  double boundary_density = 0.0;  // int over the chord of (f*)'
};

/// Contribution of edge a->b (coordinates relative to the site) to the fan
/// decomposition of the cell integrals.
EdgeSums integrate_edge(Vec2 a, Vec2 b, const Radial &rad, double radius2, bool want_boundary) {
  EdgeSums out;
  const Vec2 ab = b - a;
  const double len = norm(ab);
  if (!(len > 0.0)) return out;
  const Vec2 u = ab / len;
  const double d = cross(a, u);
  const double beta = dot(a, u);
  const double disc = beta * beta - (norm2(a) - radius2);

  double s_in0 = len, s_in1 = len;
  if (disc > 0.0) {
    const double root = std::sqrt(disc);
    s_in0 = std::clamp(-beta - root, 0.0, len);
    s_in1 = std::clamp(-beta + root, 0.0, len);
  }
  auto point = [&](double s) { return a + s * u; };
  auto angle = [&](double s0, double s1) {
    const Vec2 p0 = point(s0), p1 = point(s1);
    return std::atan2(cross(p0, p1), dot(p0, p1));
  };

  // parts of the edge outside the disk see the saturated antiderivative
  double theta_out = 0.0;
  if (s_in1 > s_in0) {
    if (s_in0 > 0.0) theta_out += angle(0.0, s_in0);
    if (s_in1 < len) theta_out += angle(s_in1, len);
  } else {
    theta_out = angle(0.0, len);
  }
  out.mass = rad.mass_out() * theta_out;
  out.conj = rad.conj_out() * theta_out;
  out.hess = rad.hess_out() * theta_out;

  if (!(s_in1 > s_in0)) return out;
  const double half = 0.5 * (s_in1 - s_in0);
  const double mid = 0.5 * (s_in1 + s_in0);
  const double m_out = rad.mass_out();
  double fan_mass = 0.0, fan_conj = 0.0, fan_hess = 0.0, flux = 0.0, bdens = 0.0;
  for (std::size_t k = 0; k < kGaussNodes.size(); ++k) {
    const double s = mid + half * kGaussNodes[k];
    const double rho2 = norm2(point(s));
    const double w = kGaussWeights[k];
    if (d != 0.0 && rho2 > 0.0) {
      fan_mass += w * rad.mass(rho2) / rho2;
      fan_conj += w * rad.conj(rho2) / rho2;
      fan_hess += w * rad.hess(rho2) / rho2;
    }
    flux += w * (rad.mass(rho2) - m_out);
    if (want_boundary) bdens += w * rad.density(rho2);
  }
  out.mass += d * half * fan_mass;
  out.conj += d * half * fan_conj;
  out.hess += d * half * fan_hess;
  // divergence theorem: int_P (x - y) g = sum_edges n_e int_e (G - G_out)
  const Vec2 normal{u.y, -u.x};
  out.moment = (half * flux) * normal;
  out.boundary_density = half * bdens;
  return out;
}

struct CellResult {
  double mass = 0.0;
  double conj = 0.0;
  double hess_diag = 0.0;
  Vec2 moment;
  std::vector<HessianEntry> offdiag;
};

class CellIntegrator {
 public:
  explicit CellIntegrator(const IntegrationRequest &req) : req_(req) {
    const std::size_t n = req.positions.size();
    radius_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      radius_[i] = req.weights[i] > 0.0 ? std::sqrt(2.0 * req.epsilon * req.weights[i]) : 0.0;
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(), [&](int a, int b) {
      return req.positions[a].x < req.positions[b].x || (req.positions[a].x == req.positions[b].x && a < b);
    });
    sorted_x_.resize(n);
    for (std::size_t k = 0; k < n; ++k) sorted_x_[k] = req.positions[order_[k]].x;
    max_radius_ = n ? *std::max_element(radius_.begin(), radius_.end()) : 0.0;
  }

  CellResult cell(int i) const {
    CellResult res;
    const double radius = radius_[i];
    if (!(radius > 0.0)) return res;
    const Vec2 yi = req_.positions[i];
    const double phi_i = req_.weights[i];
    const double eps = req_.epsilon;
    const double r2 = radius * radius;

    // Only sites whose disks overlap B_i can cut the charged part of Lag_i.
    std::vector<HalfPlane> cuts;
    const double reach = radius + max_radius_;
    auto lo = std::lower_bound(sorted_x_.begin(), sorted_x_.end(), yi.x - reach);
    auto hi = std::upper_bound(sorted_x_.begin(), sorted_x_.end(), yi.x + reach);
    std::vector<int> nbrs;
    for (auto it = lo; it != hi; ++it) nbrs.push_back(order_[it - sorted_x_.begin()]);
    std::sort(nbrs.begin(), nbrs.end());
    for (int j : nbrs) {
      if (j == i || !(radius_[j] > 0.0)) continue;
      const Vec2 dvec = req_.positions[j] - yi;
      const double dist2 = norm2(dvec);
      const double rsum = radius + radius_[j];
      if (dist2 >= rsum * rsum) continue;
      if (dist2 == 0.0) {
        // coincident sites: larger weight wins, lowest index on ties
        if (req_.weights[j] > phi_i || (req_.weights[j] == phi_i && j < i)) return CellResult{};
        continue;
      }
      cuts.push_back({dvec, 0.5 * (dist2 + 2.0 * eps * (phi_i - req_.weights[j])), j});
    }

    const RadialProfile prof = req_.profile;
    const Radial rad{prof.coef, prof.q, phi_i, eps};
    for (const IntegrationPiece &piece : req_.pieces) {
      ConvexPolygon poly;
      poly.vertices.reserve(piece.polygon.vertices.size());
      for (const Vec2 &v : piece.polygon.vertices) poly.vertices.push_back(v - yi);
      poly.edge_tag = piece.polygon.edge_tag;
      poly = clip(poly, {{1.0, 0.0}, radius, kBoxEdge});
      poly = clip(poly, {{-1.0, 0.0}, radius, kBoxEdge});
      poly = clip(poly, {{0.0, 1.0}, radius, kBoxEdge});
      poly = clip(poly, {{0.0, -1.0}, radius, kBoxEdge});
      for (const HalfPlane &hp : cuts) {
        if (poly.empty()) break;
        poly = clip(poly, hp);
      }
      if (poly.empty()) continue;

      const std::size_t nv = poly.vertices.size();
      double mass = 0.0, conj = 0.0, hess = 0.0;
      Vec2 moment;
      for (std::size_t k = 0; k < nv; ++k) {
        const int tag = poly.edge_tag[k];
        const bool laguerre_edge = req_.want_hessian && tag >= 0;
        const EdgeSums e = integrate_edge(poly.vertices[k], poly.vertices[(k + 1) % nv], rad, r2, laguerre_edge);
        mass += e.mass;
        conj += e.conj;
        hess += e.hess;
        moment += e.moment;
        if (laguerre_edge && e.boundary_density != 0.0) {
          const double speed = eps / norm(req_.positions[tag] - yi);
          const double v = piece.scale * e.boundary_density * speed;
          res.hess_diag += v;
          res.offdiag.push_back({i, tag, -v});
        }
      }
      res.mass += piece.scale * mass;
      res.conj += piece.scale * conj;
      res.hess_diag += piece.scale * hess;
      res.moment += piece.scale * moment;
    }
    // moment so far is int (x - y_i) g; shift to absolute coordinates
    res.moment += res.mass * yi;
    if (!res.offdiag.empty()) {
      std::sort(res.offdiag.begin(), res.offdiag.end(),
                [](const HessianEntry &a, const HessianEntry &b) { return a.col < b.col; });
      // merge duplicate columns coming from several pieces
      std::vector<HessianEntry> merged;
      for (const HessianEntry &h : res.offdiag) {
        if (!merged.empty() && merged.back().col == h.col)
          merged.back().value += h.value;
        else
          merged.push_back(h);
      }
      res.offdiag = std::move(merged);
    }
    return res;
  }

 private:
  const IntegrationRequest &req_;
  std::vector<double> radius_;
  std::vector<int> order_;
  std::vector<double> sorted_x_;
  double max_radius_ = 0.0;
};

CellIntegrals gather(std::vector<CellResult> &cells, bool want_hessian) {
  CellIntegrals out;
  const std::size_t n = cells.size();
  out.mass.resize(n);
  out.conjugate.resize(n);
  out.moment.resize(n);
  if (want_hessian) out.hessian_diag.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mass[i] = cells[i].mass;
    out.conjugate[i] = cells[i].conj;
    out.moment[i] = cells[i].moment;
    if (want_hessian) {
      out.hessian_diag[i] = cells[i].hess_diag;
      out.hessian_offdiag.insert(out.hessian_offdiag.end(), cells[i].offdiag.begin(), cells[i].offdiag.end());
    }
  }
  return out;
}

}  // namespace

CellIntegrals integrate_cells(const IntegrationRequest &req) {
  const CellIntegrator integrator(req);
  const int n = static_cast<int>(req.positions.size());
  std::vector<CellResult> cells(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) cells[i] = integrator.cell(i);
  return gather(cells, req.want_hessian);
}

CellIntegrals integrate_cells_serial(const IntegrationRequest &req) {
  const CellIntegrator integrator(req);
  const int n = static_cast<int>(req.positions.size());
  std::vector<CellResult> cells(n);
  for (int i = 0; i < n; ++i) cells[i] = integrator.cell(i);
  return gather(cells, req.want_hessian);
}

}  // namespace mfg
