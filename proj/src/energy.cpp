#include "mfgc/energy.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>

#include "mfgc/errors.hpp"

namespace mfg {

DiscreteMeasure TrajectoryEnsemble::slice(int k) const {
  DiscreteMeasure mu;
  mu.mass = mass;
  mu.positions.assign(positions.begin() + static_cast<std::ptrdiff_t>(k) * particles,
                      positions.begin() + static_cast<std::ptrdiff_t>(k + 1) * particles);
  return mu;
}

TrajectoryEnsemble TrajectoryEnsemble::stationary(std::vector<Vec2> initial, double mass, double horizon, int steps) {
  TrajectoryEnsemble e;
  e.steps = steps;
  e.particles = static_cast<int>(initial.size());
  e.mass = mass;
  e.horizon = horizon;
  e.positions.reserve(static_cast<std::size_t>(steps + 1) * initial.size());
  for (int k = 0; k <= steps; ++k) e.positions.insert(e.positions.end(), initial.begin(), initial.end());
  return e;
}

void TrajectoryEnsemble::validate() const {
  if (steps < 1 || particles < 1) throw SolverError(ErrorCode::invalid_input, "ensemble: needs M >= 1 and N >= 1");
  if (positions.size() != static_cast<std::size_t>(steps + 1) * particles)
    throw SolverError(ErrorCode::invalid_input, "ensemble: position array has the wrong size");
  if (!(mass > 0.0) || !(horizon > 0.0))
    throw SolverError(ErrorCode::invalid_input, "ensemble: mass and horizon must be positive");
  for (const Vec2 &p : positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw SolverError(ErrorCode::invalid_input, "ensemble: non-finite position");
}

double Lagrangian::value(Vec2 p) const { return std::pow(norm(p), exponent) / exponent; }

Vec2 Lagrangian::gradient(Vec2 p) const {
  if (exponent == 2.0) return p;
  const double n = norm(p);
  if (n == 0.0) return {};
  return std::pow(n, exponent - 2.0) * p;
}

PotentialSample PotentialTerm::eval(Vec2 x) const {
  const Vec2 d = x - center;
  switch (kind) {
    case PotentialKind::zero:
      return {};
    case PotentialKind::quadratic:
      return {scale * norm2(d), (2.0 * scale) * d};
    case PotentialKind::ring_well: {
      const double s = norm2(d) - radius * radius;
      return {scale * s * s, (4.0 * scale * s) * d};
    }
  }
  return {};
}

Vec2 PotentialTerm::argmin_near(Vec2 from) const {
  switch (kind) {
    case PotentialKind::quadratic:
      return center;
    case PotentialKind::ring_well: {
      const Vec2 d = from - center;
      const double n = norm(d);
      return n > 0.0 ? center + (radius / n) * d : center + Vec2{radius, 0.0};
    }
    default:
      return from;
  }
}

PotentialSample PotentialModel::terminal_at(Vec2 x) const {
  if (!terminal_field) return terminal.eval(x);
  const PotentialField &f = *terminal_field;
  // Hermite interpolant on the node rectangle, then a cone with the outside
  // slowness from the nearest node-rectangle point
  const Rect r = node_rect(f);
  const Vec2 c{std::clamp(x.x, r.x0, r.x1), std::clamp(x.y, r.y0, r.y1)};
  PotentialSample s = sample_potential_smooth(f, c);
  const Vec2 out = x - c;
  const double dist = norm(out);
  if (dist > 0.0) {
    const double slowness = 1.0 / f.speed_outside;
    s.value += slowness * dist;
    // the clamped coordinate no longer moves with x
    if (x.x != c.x) s.gradient.x = 0.0;
    if (x.y != c.y) s.gradient.y = 0.0;
    s.gradient += (slowness / dist) * out;
  }
  return s;
}

Vec2 PotentialModel::terminal_target(Vec2 from) const {
  if (!terminal_field) return terminal.argmin_near(from);
  Vec2 best = from;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Vec2 &s : terminal_field->sources)
    if (norm(s - from) < best_d) {
      best_d = norm(s - from);
      best = s;
    }
  return best;
}

PotentialKind potential_kind_from_string(const std::string &name) {
  if (name == "zero") return PotentialKind::zero;
  if (name == "quadratic") return PotentialKind::quadratic;
  if (name == "ring_well") return PotentialKind::ring_well;
  throw std::invalid_argument("unknown potential kind '" + name + "'");
}

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::zero:
      return "zero";
    case PotentialKind::quadratic:
      return "quadratic";
    case PotentialKind::ring_well:
      return "ring_well";
  }
  return "zero";
}

double EnergyBreakdown::gradient_sup_norm() const {
  double m = 0.0;
  for (const Vec2 &g : gradient) m = std::max({m, std::abs(g.x), std::abs(g.y)});
  return m;
}

EnergyBreakdown evaluate(const TrajectoryEnsemble &ens, const EnergyContext &ctx, WarmStarts *warm) {
  ens.validate();
  const int M = ens.steps;
  const int N = ens.particles;
  const double w = ens.mass;
  const double delta = ens.delta();
  EnergyBreakdown out;
  out.gradient.assign(static_cast<std::size_t>(M) * N, Vec2{});
  auto grad = [&](int k, int i) -> Vec2 & { return out.gradient[static_cast<std::size_t>(k - 1) * N + i]; };

  for (int k = 0; k < M; ++k)
    for (int i = 0; i < N; ++i) {
      const Vec2 v = (ens.at(k + 1, i) - ens.at(k, i)) / delta;
      out.kinetic += w * delta * ctx.lagrangian.value(v);
      const Vec2 g = w * ctx.lagrangian.gradient(v);
      grad(k + 1, i) += g;
      if (k >= 1) grad(k, i) -= g;
    }

  if (ctx.potential.has_running())
    for (int k = 1; k < M; ++k)
      for (int i = 0; i < N; ++i) {
        const PotentialSample s = ctx.potential.running_at(ens.at(k, i));
        out.running_potential += w * delta * s.value;
        grad(k, i) += (w * delta) * s.gradient;
      }
  for (int i = 0; i < N; ++i) {
    const PotentialSample s = ctx.potential.terminal_at(ens.at(M, i));
    out.terminal_potential += w * s.value;
    grad(M, i) += w * s.gradient;
  }

  if (ctx.congestion && M > 1) {
    if (ctx.grid == nullptr) throw SolverError(ErrorCode::invalid_input, "energy: congestion needs a grid");
    const MoreauProblem problem(*ctx.grid, ctx.model, ctx.epsilon, ctx.quadrature);
    if (warm) warm->slices.resize(M - 1);
    out.per_slice_moreau.resize(M - 1);
    std::vector<std::exception_ptr> errors(M - 1);
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 1; k < M; ++k) {
      try {
        const DiscreteMeasure mu = ens.slice(k);
        std::optional<std::span<const double>> init;
        if (warm && warm->slices[k - 1].size() == static_cast<std::size_t>(N)) init = warm->slices[k - 1];
        out.per_slice_moreau[k - 1] = solve_dual(problem, mu, init, ctx.dual);
      } catch (...) {
        errors[k - 1] = std::current_exception();
      }
    }
    for (const auto &e : errors)
      if (e) std::rethrow_exception(e);
    for (int k = 1; k < M; ++k) {
      const MoreauSolution &sol = out.per_slice_moreau[k - 1];
      out.congestion += delta * sol.value;
      for (int i = 0; i < N; ++i) grad(k, i) += delta * sol.position_gradient[i];
      if (warm) warm->slices[k - 1] = sol.weights;
    }
  }
  out.total = out.kinetic + out.congestion + out.running_potential + out.terminal_potential;
  return out;
}

}  // namespace mfg
