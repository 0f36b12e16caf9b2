#include "mfgc/moreau.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mfgc/errors.hpp"

namespace mfg {

const char *to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input:
      return "INVALID_INPUT";
    case ErrorCode::feasibility:
      return "FEASIBILITY";
    case ErrorCode::stalled:
      return "STALLED";
    case ErrorCode::line_search_failure:
      return "LINE_SEARCH_FAILURE";
    case ErrorCode::io:
      return "IO";
  }
  return "UNKNOWN";
}

MoreauProblem::MoreauProblem(const GridDomain &grid, CongestionModel model, double epsilon, Quadrature quadrature)
    : grid_(&grid), model_(model), epsilon_(epsilon), quadrature_(quadrature) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw SolverError(ErrorCode::invalid_input, "moreau: epsilon must be positive");
  model_.validate();
  pieces_ = integration_pieces(grid, model_);
}

double MoreauProblem::capacity() const {
  if (!model_.is_hard()) return std::numeric_limits<double>::infinity();
  if (quadrature_ == Quadrature::exact) return exact_capacity(*grid_, model_);
  const double inside = grid_->inside_area();
  if (!model_.two_region_model()) return model_.cap * inside;
  return model_.cap * inside + model_.outside_cap * (grid_->hull_area() - inside);
}

namespace {

struct DualEval {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> mass;
  std::vector<Vec2> moment;
  std::vector<double> hessian_diag;
  std::vector<HessianEntry> hessian_offdiag;
};

DualEval evaluate_pixel(const MoreauProblem &problem, const DiscreteMeasure &measure, std::span<const double> phi) {
  const GridDomain &grid = problem.grid();
  const CongestionModel &model = problem.model();
  const CellAssignment cells = assign_cells(grid, measure.positions, phi, problem.epsilon(), problem.mask());
  const std::size_t n = measure.size();
  DualEval ev;
  ev.mass.assign(n, 0.0);
  ev.moment.assign(n, Vec2{});
  std::vector<double> conj(n, 0.0);
  const double area = grid.pixel_area();
  for (std::size_t k = 0; k < grid.pixel_count(); ++k) {
    const int i = cells.owner[k];
    if (i == kNoOwner) continue;
    const double p = -cells.cost_at_owner[k];
    if (!(p > 0.0)) continue;
    const Region region = (model.two_region_model() && !grid.inside(k)) ? Region::outside : Region::inside;
    const double rho = conjugate_deriv(model, p, region) * area;
    ev.mass[i] += rho;
    ev.moment[i] += rho * grid.pixel_center(k);
    conj[i] += conjugate(model, p, region) * area;
  }
  ev.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.value += measure.mass * phi[i] - conj[i];
    ev.gradient[i] = measure.mass - ev.mass[i];
  }
  return ev;
}

DualEval evaluate(const MoreauProblem &problem, const DiscreteMeasure &measure, std::span<const double> phi,
                  bool want_hessian) {
  if (phi.size() != measure.size()) throw SolverError(ErrorCode::invalid_input, "moreau: weight count mismatch");
  if (problem.quadrature() == Quadrature::pixel) return evaluate_pixel(problem, measure, phi);
  IntegrationRequest req;
  req.pieces = problem.pieces();
  req.profile = radial_profile(problem.model());
  req.positions = measure.positions;
  req.weights = phi;
  req.epsilon = problem.epsilon();
  req.want_hessian = want_hessian;
  CellIntegrals cells = integrate_cells(req);
  DualEval ev;
  const std::size_t n = measure.size();
  ev.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.value += measure.mass * phi[i] - cells.conjugate[i];
    ev.gradient[i] = measure.mass - cells.mass[i];
  }
  ev.mass = std::move(cells.mass);
  ev.moment = std::move(cells.moment);
  ev.hessian_diag = std::move(cells.hessian_diag);
  ev.hessian_offdiag = std::move(cells.hessian_offdiag);
  return ev;
}

double sup_norm(const std::vector<double> &v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double two_norm(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double min_of(const std::vector<double> &v) { return *std::min_element(v.begin(), v.end()); }

void check_measure(const MoreauProblem &problem, const DiscreteMeasure &measure) {
  if (measure.positions.empty()) throw SolverError(ErrorCode::invalid_input, "moreau: empty measure");
  if (!(measure.mass > 0.0)) throw SolverError(ErrorCode::invalid_input, "moreau: particle mass must be positive");
  for (const Vec2 &p : measure.positions)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw SolverError(ErrorCode::invalid_input, "moreau: non-finite particle position");
  const double capacity = problem.capacity();
  if (!(measure.total_mass() < capacity)) {
    std::ostringstream msg;
    msg << "moreau: total mass " << measure.total_mass() << " does not fit in capacity " << capacity;
    throw SolverError(ErrorCode::feasibility, msg.str());
  }
}

double inside_scale(const MoreauProblem &problem) {
  return problem.model().is_hard() ? problem.model().cap : 1.0;
}

/// Raises the weights of empty cells until every cell carries mass. An empty
/// site needs phi_i > min_x [c_i(x) - min(0, min_j c_j(x) - phi_j)] over the
/// region; the minimizing pixel is found on the grid and the raise applied
/// one site at a time so two empty sites never aim for the same spot.
DualEval make_cells_nonempty(const MoreauProblem &problem, const DiscreteMeasure &measure, std::vector<double> &phi,
                             double phi_ideal) {
  const GridDomain &grid = problem.grid();
  const double inv2eps = 0.5 / problem.epsilon();
  const std::size_t n = measure.size();
  const bool hess = problem.quadrature() == Quadrature::exact;
  DualEval ev = evaluate(problem, measure, phi, hess);
  for (int round = 0; round < 20 && min_of(ev.mass) <= 0.0; ++round) {
    CellAssignment cells = assign_cells(grid, measure.positions, phi, problem.epsilon(), problem.mask());
    std::vector<std::size_t> region;
    for (std::size_t k = 0; k < grid.pixel_count(); ++k)
      if (cells.owner[k] != kNoOwner) region.push_back(k);
    if (region.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      if (ev.mass[i] > 0.0) continue;
      const Vec2 y = measure.positions[i];
      double need = std::numeric_limits<double>::infinity();
      for (std::size_t k : region) {
        const double c = norm2(grid.pixel_center(k) - y) * inv2eps;
        need = std::min(need, c - std::min(cells.cost_at_owner[k], 0.0));
      }
      phi[i] = std::max(phi[i], need + 0.25 * phi_ideal);
      for (std::size_t k : region) {
        const double c = norm2(grid.pixel_center(k) - y) * inv2eps - phi[i];
        if (c < cells.cost_at_owner[k]) cells.cost_at_owner[k] = c;
      }
    }
    ev = evaluate(problem, measure, phi, hess);
  }
  return ev;
}

/// Solves (dm/dphi + damping I) step = gradient on the sparse symmetric
/// Laplacian-like Hessian of the cell masses.
bool newton_direction(const DualEval &ev, std::vector<double> &step, double damping = 0.0) {
  const int n = static_cast<int>(ev.gradient.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n + ev.hessian_offdiag.size());
  double dmax = 0.0;
  for (int i = 0; i < n; ++i) dmax = std::max(dmax, ev.hessian_diag[i]);
  if (!(dmax > 0.0) && !(damping > 0.0)) return false;
  const double shift = 1e-12 * dmax + damping;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, ev.hessian_diag[i] + shift);
  for (const HessianEntry &h : ev.hessian_offdiag) {
    trip.emplace_back(h.row, h.col, 0.5 * h.value);
    trip.emplace_back(h.col, h.row, 0.5 * h.value);
  }
  Eigen::SparseMatrix<double> hess(n, n);
  hess.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(hess);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::Map<const Eigen::VectorXd> rhs(ev.gradient.data(), n);
  Eigen::VectorXd x = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) return false;
  step.assign(x.data(), x.data() + n);
  return true;
}

}  // namespace

double dual_value(const MoreauProblem &problem, const DiscreteMeasure &measure, std::span<const double> weights) {
  return evaluate(problem, measure, weights, false).value;
}

std::vector<double> dual_gradient(const MoreauProblem &problem, const DiscreteMeasure &measure,
                                  std::span<const double> weights) {
  return evaluate(problem, measure, weights, false).gradient;
}

std::vector<double> initial_weights(const MoreauProblem &problem, const DiscreteMeasure &measure) {
  const RadialProfile prof = radial_profile(problem.model());
  // isolated cell mass is 2 pi eps coef scale phi^q
  const double base = measure.mass / (2.0 * std::numbers::pi * problem.epsilon() * prof.coef * inside_scale(problem));
  return std::vector<double>(measure.size(), std::pow(base, 1.0 / prof.q));
}

MoreauSolution solve_dual(const MoreauProblem &problem, const DiscreteMeasure &measure,
                          std::optional<std::span<const double>> init, const SolveOptions &options) {
  check_measure(problem, measure);
  const std::size_t n = measure.size();
  const double w = measure.mass;
  const double phi_ideal = initial_weights(problem, measure).front();
  std::vector<double> phi;
  if (init && init->size() == n)
    phi.assign(init->begin(), init->end());
  else
    phi.assign(n, phi_ideal);

  const bool use_newton = options.method == DualMethod::newton && problem.quadrature() == Quadrature::exact;
  DualEval ev = make_cells_nonempty(problem, measure, phi, phi_ideal);
  int iter = 0;
  SolveStatus status = SolveStatus::stalled;
  double ascent_step = phi_ideal / w;
  double damping = 1.0;  // relative to the isolated-cell slope w / phi_ideal
  std::vector<double> step(n), trial(n);

  for (; iter <= options.max_iters; ++iter) {
    if (sup_norm(ev.gradient) <= options.tol * w) {
      status = SolveStatus::converged;
      break;
    }
    if (iter == options.max_iters) break;

    bool accepted = false;
    if (use_newton && min_of(ev.mass) > 0.0 && newton_direction(ev, step)) {
      const double res0 = two_norm(ev.gradient);
      const double floor_mass = 0.5 * std::min(min_of(ev.mass), w);
      for (double alpha = 1.0; alpha > 1e-10; alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = phi[i] + alpha * step[i];
        DualEval cand = evaluate(problem, measure, trial, true);
        if (min_of(cand.mass) >= floor_mass && two_norm(cand.gradient) <= (1.0 - 0.5 * alpha) * res0) {
          phi.swap(trial);
          ev = std::move(cand);
          accepted = true;
          break;
        }
      }
    }
    if (use_newton && !accepted && newton_direction(ev, step, damping * w / phi_ideal)) {
      // empty cells or a failed Newton search: Levenberg-Marquardt step,
      // an ascent direction of the concave dual for any damping > 0
      const double slope = std::inner_product(ev.gradient.begin(), ev.gradient.end(), step.begin(), 0.0);
      for (double alpha = 1.0; alpha > 1e-6; alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = phi[i] + alpha * step[i];
        DualEval cand = evaluate(problem, measure, trial, true);
        if (cand.value >= ev.value + 1e-4 * alpha * slope) {
          damping = alpha == 1.0 ? std::max(damping * 0.25, 1e-8) : std::min(damping * 4.0, 1e8);
          phi.swap(trial);
          ev = std::move(cand);
          accepted = true;
          break;
        }
      }
      if (!accepted) damping = std::min(damping * 16.0, 1e8);
    }
    if (!accepted) {
      // projected-free concave ascent with Barzilai-Borwein steps and
      // Armijo backtracking on the dual value
      const double g2 = std::inner_product(ev.gradient.begin(), ev.gradient.end(), ev.gradient.begin(), 0.0);
      double alpha = ascent_step;
      for (int bt = 0; bt < 60; ++bt, alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = phi[i] + alpha * ev.gradient[i];
        DualEval cand = evaluate(problem, measure, trial, use_newton);
        if (cand.value >= ev.value + 1e-4 * alpha * g2) {
          double ss = 0.0, sy = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double s = trial[i] - phi[i];
            ss += s * s;
            sy += s * (cand.gradient[i] - ev.gradient[i]);
          }
          ascent_step = sy < 0.0 ? ss / -sy : 2.0 * alpha;
          phi.swap(trial);
          ev = std::move(cand);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
  }

  MoreauSolution sol;
  sol.value = ev.value;
  sol.weights = phi;
  sol.cell_mass = ev.mass;
  sol.iterations = iter;
  sol.status = status;
  sol.residual = sup_norm(ev.gradient) / w;
  sol.barycenter.resize(n);
  sol.position_gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 y = measure.positions[i];
    sol.barycenter[i] = ev.mass[i] > 0.0 ? ev.moment[i] / ev.mass[i] : y;
    sol.position_gradient[i] = (w / problem.epsilon()) * (y - sol.barycenter[i]);
  }
  sol.max_density = std::numeric_limits<double>::quiet_NaN();
  if (options.pixel_diagnostics) sol.max_density = projected_density(problem, sol, measure).max();
  return sol;
}

double DensityField::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * pixel_area;
}

double DensityField::max() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

DensityField projected_density(const MoreauProblem &problem, const MoreauSolution &solution,
                               const DiscreteMeasure &measure) {
  const GridDomain &grid = problem.grid();
  const CongestionModel &model = problem.model();
  DensityField field;
  field.bounds = grid.bounds();
  field.nx = grid.nx();
  field.ny = grid.ny();
  field.pixel_area = grid.pixel_area();
  field.values.assign(grid.pixel_count(), 0.0);
  const CellAssignment cells =
      assign_cells(grid, measure.positions, solution.weights, problem.epsilon(), problem.mask());
  for (std::size_t k = 0; k < grid.pixel_count(); ++k) {
    if (cells.owner[k] == kNoOwner) continue;
    const Region region = (model.two_region_model() && !grid.inside(k)) ? Region::outside : Region::inside;
    field.values[k] = conjugate_deriv(model, -cells.cost_at_owner[k], region);
  }
  return field;
}

}  // namespace mfg
