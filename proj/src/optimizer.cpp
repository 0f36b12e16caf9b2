#include "mfgc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "mfgc/errors.hpp"

namespace mfg {

namespace {

using Vector = std::vector<double>;

double dot(const Vector &a, const Vector &b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

double sup_norm(const Vector &a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

Vector flatten_free(const TrajectoryEnsemble &e) {
  Vector x;
  x.reserve(static_cast<std::size_t>(2) * e.steps * e.particles);
  for (std::size_t n = static_cast<std::size_t>(e.particles); n < e.positions.size(); ++n) {
    x.push_back(e.positions[n].x);
    x.push_back(e.positions[n].y);
  }
  return x;
}

void scatter_free(const Vector &x, TrajectoryEnsemble &e) {
  for (std::size_t n = 0; n + 1 < x.size(); n += 2) e.positions[e.particles + n / 2] = {x[n], x[n + 1]};
}

Vector flatten_gradient(const EnergyBreakdown &b) {
  Vector g;
  g.reserve(2 * b.gradient.size());
  for (const Vec2 &v : b.gradient) {
    g.push_back(v.x);
    g.push_back(v.y);
  }
  return g;
}

struct Point {
  double alpha = 0.0;
  double f = 0.0;
  double d = 0.0;  // directional derivative
  Vector x;
  Vector g;
  EnergyBreakdown energy;
};

class Objective {
 public:
  Objective(const TrajectoryEnsemble &shape, const EnergyContext &ctx) : work_(shape), ctx_(ctx) {}

  Point at(const Vector &x0, const Vector &dir, double alpha) {
    Point p;
    p.alpha = alpha;
    p.x = x0;
    for (std::size_t n = 0; n < x0.size(); ++n) p.x[n] += alpha * dir[n];
    fill(p);
    p.d = p.g.empty() ? 0.0 : dot(p.g, dir);
    return p;
  }

  void fill(Point &p) {
    ++evaluations;
    scatter_free(p.x, work_);
    bool finite = true;
    for (double v : p.x) finite = finite && std::isfinite(v);
    if (!finite) {
      p.f = std::numeric_limits<double>::infinity();
      return;
    }
    p.energy = evaluate(work_, ctx_, &warm_);
    p.f = p.energy.total;
    p.g = flatten_gradient(p.energy);
    if (!std::isfinite(p.f)) p.f = std::numeric_limits<double>::infinity();
  }

  int evaluations = 0;

 private:
  TrajectoryEnsemble work_;
  const EnergyContext &ctx_;
  WarmStarts warm_;
};

double interpolate(const Point &lo, const Point &hi) {
  // minimizer of the cubic through both points, safeguarded into the middle 80%
  const double a = lo.alpha, b = hi.alpha;
  double t = 0.5 * (a + b);
  if (std::isfinite(hi.f) && !hi.g.empty()) {
    const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (a - b);
    const double disc = d1 * d1 - lo.d * hi.d;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double denom = hi.d - lo.d + 2.0 * d2;
      if (denom != 0.0) t = b - (b - a) * (hi.d + d2 - d1) / denom;
    }
  }
  const double lo_b = std::min(a, b) + 0.1 * std::abs(b - a);
  const double hi_b = std::max(a, b) - 0.1 * std::abs(b - a);
  if (!std::isfinite(t) || t < lo_b || t > hi_b) t = 0.5 * (a + b);
  return t;
}

struct LineSearchOutcome {
  std::optional<Point> accepted;
  bool wolfe = false;  // curvature condition met as well
};

LineSearchOutcome strong_wolfe(Objective &obj, const Point &start, const Vector &dir, double alpha0,
                               const OptimizerConfig &cfg) {
  const double f0 = start.f, d0 = dot(start.g, dir);
  int budget = cfg.max_line_search;
  std::optional<Point> best;  // lowest point meeting sufficient decrease
  // Near a minimizer the decrease c1 * alpha * d0 drops below the rounding of
  // f; there a non-increasing step whose slope has flattened is accepted too
  // (the approximate Wolfe test of Hager and Zhang).
  const double noise = 1e-12 * std::abs(f0);
  auto armijo = [&](const Point &p) {
    if (!std::isfinite(p.f)) return false;
    if (p.f <= f0 + cfg.wolfe_c1 * p.alpha * d0) return true;
    return p.f <= f0 && f0 - p.f <= noise && -cfg.wolfe_c1 * p.alpha * d0 <= noise && p.d <= -0.8 * d0;
  };
  auto curvature = [&](const Point &p) { return std::abs(p.d) <= -cfg.wolfe_c2 * d0; };
  auto remember = [&](const Point &p) {
    if (armijo(p) && (!best || p.f < best->f)) best = p;
  };

  auto zoom = [&](Point lo, Point hi) -> LineSearchOutcome {
    while (budget-- > 0) {
      const double t = interpolate(lo, hi);
      if (!(std::abs(hi.alpha - lo.alpha) > 1e-14 * std::max(1.0, lo.alpha))) break;
      Point p = obj.at(start.x, dir, t);
      remember(p);
      if (!armijo(p) || p.f >= lo.f) {
        hi = std::move(p);
      } else {
        if (curvature(p)) return {std::move(p), true};
        if (p.d * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
      }
    }
    return {best, false};
  };

  Point prev;
  prev.alpha = 0.0;
  prev.f = f0;
  prev.d = d0;
  prev.x = start.x;
  prev.g = start.g;
  double alpha = alpha0;
  for (int i = 0; budget-- > 0; ++i) {
    Point p = obj.at(start.x, dir, alpha);
    remember(p);
    if (!armijo(p) || (i > 0 && p.f >= prev.f)) return zoom(std::move(prev), std::move(p));
    if (curvature(p)) return {std::move(p), true};
    if (p.d >= 0.0) return zoom(std::move(p), std::move(prev));
    prev = std::move(p);
    alpha *= 2.0;
  }
  return {best, false};
}

}  // namespace

void OptimizerConfig::validate() const {
  if (memory < 1) throw std::invalid_argument("optimizer: memory must be at least 1");
  if (max_iters < 0) throw std::invalid_argument("optimizer: max_iters must be nonnegative");
  if (!(grad_tol >= 0.0)) throw std::invalid_argument("optimizer: grad_tol must be nonnegative");
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
    throw std::invalid_argument("optimizer: need 0 < wolfe_c1 < wolfe_c2 < 1");
  if (max_line_search < 2) throw std::invalid_argument("optimizer: max_line_search must be at least 2");
}

OptimizeResult minimize(const TrajectoryEnsemble &start, const EnergyContext &ctx, const OptimizerConfig &cfg,
                        const IterationCallback &callback) {
  cfg.validate();
  start.validate();
  Objective obj(start, ctx);
  OptimizeResult out{start, {}};
  OptimizeReport &rep = out.report;

  Point cur;
  cur.x = flatten_free(start);
  obj.fill(cur);
  if (!std::isfinite(cur.f)) throw SolverError(ErrorCode::invalid_input, "optimizer: objective is not finite at the start");
  rep.objective_history.push_back(cur.f);
  rep.grad_norm_history.push_back(sup_norm(cur.g));
  if (callback) callback(0, out.ensemble, cur.energy);

  std::deque<std::pair<Vector, Vector>> memory;  // (s, y)
  std::deque<double> rho;
  bool restarted = false;
  rep.reason = Termination::max_iters;
  while (true) {
    if (sup_norm(cur.g) <= cfg.grad_tol) {
      rep.reason = Termination::converged;
      break;
    }
    if (rep.iterations >= cfg.max_iters) break;

    // two-loop recursion
    Vector dir = cur.g;
    std::vector<double> a(memory.size());
    for (std::size_t j = memory.size(); j-- > 0;) {
      a[j] = rho[j] * dot(memory[j].first, dir);
      for (std::size_t n = 0; n < dir.size(); ++n) dir[n] -= a[j] * memory[j].second[n];
    }
    double alpha0 = 1.0;
    if (!memory.empty()) {
      const auto &[s, y] = memory.back();
      const double gamma = dot(s, y) / dot(y, y);
      for (double &v : dir) v *= gamma;
    } else {
      alpha0 = std::min(1.0, 1.0 / std::max(sup_norm(cur.g), 1e-300));
    }
    for (std::size_t j = 0; j < memory.size(); ++j) {
      const double b = rho[j] * dot(memory[j].second, dir);
      for (std::size_t n = 0; n < dir.size(); ++n) dir[n] += (a[j] - b) * memory[j].first[n];
    }
    for (double &v : dir) v = -v;
    if (!(dot(dir, cur.g) < 0.0)) {  // not a descent direction: fall back to steepest descent
      memory.clear();
      rho.clear();
      dir = cur.g;
      for (double &v : dir) v = -v;
      alpha0 = std::min(1.0, 1.0 / std::max(sup_norm(cur.g), 1e-300));
    }

    LineSearchOutcome ls = strong_wolfe(obj, cur, dir, alpha0, cfg);
    if (!ls.accepted) {
      if (!memory.empty() && !restarted) {  // retry once from steepest descent
        memory.clear();
        rho.clear();
        restarted = true;
        continue;
      }
      rep.reason = Termination::line_search_failure;
      break;
    }
    restarted = false;
    Point next = std::move(*ls.accepted);
    Vector s(cur.x.size()), y(cur.x.size());
    for (std::size_t n = 0; n < s.size(); ++n) {
      s[n] = next.x[n] - cur.x[n];
      y[n] = next.g[n] - cur.g[n];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      memory.emplace_back(std::move(s), std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(memory.size()) > cfg.memory) {
        memory.pop_front();
        rho.pop_front();
      }
    }
    cur = std::move(next);
    ++rep.iterations;
    scatter_free(cur.x, out.ensemble);
    rep.objective_history.push_back(cur.f);
    rep.grad_norm_history.push_back(sup_norm(cur.g));
    if (callback) callback(rep.iterations, out.ensemble, cur.energy);
  }
  scatter_free(cur.x, out.ensemble);
  rep.final_energy = std::move(cur.energy);
  rep.evaluations = obj.evaluations;
  return out;
}

double check_gradient(const TrajectoryEnsemble &ens, const EnergyContext &ctx, double step, std::uint64_t seed,
                      int min_coords) {
  if (!(step > 0.0)) throw SolverError(ErrorCode::invalid_input, "check_gradient: step must be positive");
  ens.validate();
  for (int k = 1; k <= ens.steps; ++k)
    for (int i = 0; i < ens.particles; ++i)
      for (int j = i + 1; j < ens.particles; ++j)
        if (norm(ens.at(k, i) - ens.at(k, j)) < 2.0 * step)
          throw SolverError(ErrorCode::invalid_input, "check_gradient: particles " + std::to_string(i) + " and " +
                                                          std::to_string(j) + " coincide at step " +
                                                          std::to_string(k));

  const EnergyBreakdown base = evaluate(ens, ctx);
  const Vector g = flatten_gradient(base);
  const double floor = 1e-6 * std::max(1.0, sup_norm(g));

  std::vector<std::size_t> coords(g.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (static_cast<int>(coords.size()) > min_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(min_coords));
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0.0;
  TrajectoryEnsemble work = ens;
  for (std::size_t c : coords) {
    Vec2 &p = work.positions[static_cast<std::size_t>(ens.particles) + c / 2];
    double &v = c % 2 == 0 ? p.x : p.y;
    const double orig = v;
    v = orig + step;
    const double up = evaluate(work, ctx).total;
    v = orig - step;
    const double dn = evaluate(work, ctx).total;
    v = orig;
    const double fd = (up - dn) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - g[c]) / std::max({std::abs(g[c]), std::abs(fd), floor}));
  }
  return worst;
}

std::string to_string(InitStrategy s) {
  return s == InitStrategy::stationary ? "stationary" : "straight_to_target";
}

InitStrategy init_strategy_from_string(const std::string &name) {
  if (name == "stationary") return InitStrategy::stationary;
  if (name == "straight_to_target") return InitStrategy::straight_to_target;
  throw std::invalid_argument("unknown init strategy '" + name + "'");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iters:
      return "max_iters";
    case Termination::line_search_failure:
      return "line_search_failure";
  }
  return "max_iters";
}

}  // namespace mfg
