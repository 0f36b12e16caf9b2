#include "mfgc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "mfgc/errors.hpp"

namespace mfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void plan_error(const std::string &m) { throw SolverError(ErrorCode::invalid_input, "plan: " + m); }

SweepEntry parse_entry(const json &j, const std::string &where) {
  if (!j.is_object()) plan_error(where + " must be an object");
  for (const auto &[k, v] : j.items())
    if (k != "particles" && k != "steps" && k != "epsilon") plan_error("unknown key '" + where + "." + k + "'");
  SweepEntry e;
  try {
    e.particles = j.at("particles").get<int>();
    e.steps = j.at("steps").get<int>();
    if (j.contains("epsilon")) e.epsilon = j.at("epsilon").get<double>();
  } catch (const json::exception &) {
    plan_error(where + " needs integer particles and steps");
  }
  return e;
}

bool same_entry(const SweepEntry &a, const SweepEntry &b) {
  return a.particles == b.particles && a.steps == b.steps && a.epsilon == b.epsilon;
}

bool same_grid(const GridDomain &a, const GridDomain &b) {
  return a.nx() == b.nx() && a.ny() == b.ny() && a.resolution() == b.resolution() &&
         a.bounds().x0 == b.bounds().x0 && a.bounds().y0 == b.bounds().y0;
}

bool nonincreasing(const std::vector<double> &v, double slack = 0.0) {
  for (std::size_t n = 1; n < v.size(); ++n)
    if (v[n] > v[n - 1] + slack) return false;
  return true;
}

std::string join(const std::vector<double> &v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + format_number(x);
  return s;
}

}  // namespace

std::string to_string(EpsSchedule s) {
  switch (s) {
    case EpsSchedule::log_over_n:
      return "log_over_n";
    case EpsSchedule::power_law:
      return "power_law";
    case EpsSchedule::manual:
      return "manual";
  }
  return "manual";
}

EpsSchedule eps_schedule_from_string(const std::string &name) {
  if (name == "log_over_n") return EpsSchedule::log_over_n;
  if (name == "power_law") return EpsSchedule::power_law;
  if (name == "manual") return EpsSchedule::manual;
  plan_error("unknown schedule rule '" + name + "'");
}

double SweepPlan::epsilon_for(int n) const {
  switch (schedule) {
    case EpsSchedule::log_over_n:
      return scale * std::log(static_cast<double>(n)) / n;
    case EpsSchedule::power_law:
      return scale * std::pow(static_cast<double>(n), -2.0 / dimension);
    case EpsSchedule::manual:
      break;
  }
  return 0.0;
}

void SweepPlan::resolve() {
  if (runs.empty()) plan_error("no runs");
  if (!(scale > 0.0) || !(dimension > 0.0)) plan_error("schedule scale and dimension must be positive");
  if (workers < 1) plan_error("workers must be at least 1");
  auto fix = [&](SweepEntry &e, const std::string &where) {
    if (e.particles < 2 && schedule == EpsSchedule::log_over_n) plan_error(where + ": ln N / N needs N >= 2");
    if (e.particles < 1 || e.steps < 1) plan_error(where + ": particles and steps must be positive");
    if (schedule != EpsSchedule::manual) e.epsilon = epsilon_for(e.particles);
    if (!(e.epsilon > 0.0)) plan_error(where + ": epsilon must be positive");
  };
  for (std::size_t n = 0; n < runs.size(); ++n) fix(runs[n], "runs[" + std::to_string(n) + "]");
  fix(reference, "reference");
  for (std::size_t n = 1; n < runs.size(); ++n)
    if (runs[n].particles < runs[n - 1].particles) plan_error("runs must be sorted by particle count");
}

std::vector<double> SweepPlan::schedule_ratios() const {
  const double r = base.lagrangian_exponent;
  const double rp = r / (r - 1.0);
  std::vector<double> out;
  for (const SweepEntry &e : runs) out.push_back(std::pow(base.horizon / e.steps, 2.0 / rp) / e.epsilon);
  return out;
}

SweepPlan load_plan(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolverError(ErrorCode::io, "cannot read plan " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw SolverError(ErrorCode::io, std::string("plan: parse error: ") + e.what());
  }
  for (const auto &[k, v] : j.items())
    if (k != "base" && k != "schedule" && k != "runs" && k != "reference" && k != "convergence" && k != "workers")
      plan_error("unknown key '" + k + "'");
  SweepPlan plan;
  if (!j.contains("base")) plan_error("missing key 'base'");
  if (j.at("base").is_string()) {
    fs::path base = j.at("base").get<std::string>();
    if (base.is_relative()) base = path.parent_path() / base;
    plan.base = load_config(base);
  } else {
    plan.base = parse_config(j.at("base").dump());
  }
  if (j.contains("schedule")) {
    const json &s = j.at("schedule");
    for (const auto &[k, v] : s.items())
      if (k != "rule" && k != "scale" && k != "dimension") plan_error("unknown key 'schedule." + k + "'");
    plan.schedule = eps_schedule_from_string(s.value("rule", std::string("log_over_n")));
    plan.scale = s.value("scale", 1.0);
    plan.dimension = s.value("dimension", 2.0);
  }
  if (!j.contains("runs") || !j.at("runs").is_array()) plan_error("'runs' must be a list");
  for (std::size_t n = 0; n < j.at("runs").size(); ++n)
    plan.runs.push_back(parse_entry(j.at("runs")[n], "runs[" + std::to_string(n) + "]"));
  if (j.contains("reference"))
    plan.reference = parse_entry(j.at("reference"), "reference");
  else
    plan.reference = plan.runs.back();
  plan.convergence = j.value("convergence", false);
  plan.workers = j.value("workers", 1);
  plan.resolve();
  return plan;
}

SweepRun execute(const ScenarioConfig &base, const SweepEntry &entry) {
  ScenarioConfig c = base;
  c.particles = entry.particles;
  c.steps = entry.steps;
  c.epsilon = entry.epsilon;
  SweepRun run{entry, build_scenario(c), {}};
  run.result = run_scenario(run.scenario);
  return run;
}

std::vector<DensityField> slice_densities(const SweepRun &run) {
  const Scenario &s = run.scenario;
  const MoreauProblem problem(*s.grid, s.context.model, s.context.epsilon, s.context.quadrature);
  const auto &sols = run.result.report.final_energy.per_slice_moreau;
  std::vector<DensityField> out;
  for (std::size_t k = 0; k < sols.size(); ++k)
    out.push_back(projected_density(problem, sols[k], run.result.ensemble.slice(static_cast<int>(k) + 1)));
  return out;
}

std::optional<DensityField> density_at(const SweepRun &run, const std::vector<DensityField> &slices, double t) {
  const double delta = run.result.ensemble.delta();
  const double s = t / delta;
  const int m = run.result.ensemble.steps;
  constexpr double tol = 1e-9;
  if (slices.empty() || s < 1.0 - tol || s > m - 1 + tol) return std::nullopt;
  const int j = std::clamp(static_cast<int>(std::floor(s + tol)), 1, m - 1);
  const double frac = s - j;
  if (frac <= tol || j == m - 1) return slices[j - 1];
  DensityField out = slices[j - 1];
  const DensityField &next = slices[j];
  for (std::size_t n = 0; n < out.values.size(); ++n)
    out.values[n] = (1.0 - frac) * out.values[n] + frac * next.values[n];
  return out;
}

double semi_discrete_w2(const GridDomain &grid, const DensityField &density, const DiscreteMeasure &mu) {
  const std::size_t n = mu.size();
  double total = 0.0;
  for (double v : density.values) total += v * density.pixel_area;
  if (!(total > 0.0)) throw SolverError(ErrorCode::invalid_input, "semi_discrete_w2: empty density");
  const double norm = mu.total_mass() / total;  // match masses exactly
  std::vector<double> pixel_mass(density.values.size());
  for (std::size_t k = 0; k < pixel_mass.size(); ++k) pixel_mass[k] = density.values[k] * density.pixel_area * norm;

  // dual of W_2^2: sup_psi sum_i w psi_i + sum_x m(x) min_i(|x - y_i|^2 - psi_i)
  auto eval = [&](const std::vector<double> &psi, std::vector<double> &grad) {
    const CellAssignment a = assign_cells(grid, mu.positions, psi, 0.5, MaskKind::hull);
    double value = 0.0;
    grad.assign(n, mu.mass);
    for (std::size_t i = 0; i < n; ++i) value += mu.mass * psi[i];
    for (std::size_t k = 0; k < pixel_mass.size(); ++k) {
      if (pixel_mass[k] == 0.0 || a.owner[k] == kNoOwner) continue;
      value += pixel_mass[k] * a.cost_at_owner[k];
      grad[a.owner[k]] -= pixel_mass[k];
    }
    return value;
  };

  std::vector<double> psi(n, 0.0), grad, trial_grad;
  double value = eval(psi, grad);
  double best = value;
  double step = grid.inside_area() / (static_cast<double>(n) * mu.mass);
  for (int it = 0; it < 300; ++it) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax <= 1e-3 * mu.mass) break;
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    std::vector<double> trial(n);
    double tv = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = psi[i] + step * grad[i];
      tv = eval(trial, trial_grad);
      if (tv >= value + 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    // Barzilai-Borwein step from the accepted move
    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = trial[i] - psi[i], y = trial_grad[i] - grad[i];
      sy += s * y;
      ss += s * s;
    }
    psi.swap(trial);
    grad.swap(trial_grad);
    value = tv;
    best = std::max(best, value);
    if (sy < 0.0) step = ss / -sy;
  }
  return std::sqrt(std::max(best, 0.0));
}

SweepReport run_sweep(SweepPlan plan, const fs::path *out_dir, std::vector<SweepRun> *runs_out) {
  plan.resolve();
  SweepReport rep;
  rep.schedule_ratios = plan.schedule_ratios();

  // reference first; entries equal to it reuse its result
  std::vector<SweepEntry> todo = plan.runs;
  todo.push_back(plan.reference);
  std::vector<std::optional<SweepRun>> done(todo.size());
  std::vector<std::string> errors(todo.size());
  auto job = [&](std::size_t n) {
    try {
      done[n] = execute(plan.base, todo[n]);
    } catch (const std::exception &e) {
      errors[n] = e.what();
    }
  };
  std::vector<std::size_t> unique;
  for (std::size_t n = 0; n < todo.size(); ++n)
    if (n == todo.size() - 1 || !same_entry(todo[n], plan.reference)) unique.push_back(n);
  for (std::size_t b = 0; b < unique.size(); b += plan.workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t n = b; n < std::min(unique.size(), b + plan.workers); ++n)
      batch.push_back(std::async(plan.workers > 1 ? std::launch::async : std::launch::deferred, job, unique[n]));
    for (auto &f : batch) f.get();
  }
  const std::size_t ref_idx = todo.size() - 1;
  for (std::size_t n = 0; n < ref_idx; ++n)
    if (same_entry(todo[n], plan.reference)) {
      done[n] = done[ref_idx];
      errors[n] = errors[ref_idx];
    }

  std::vector<DensityField> ref_slices;
  if (done[ref_idx]) ref_slices = slice_densities(*done[ref_idx]);

  auto make_row = [&](std::size_t n) {
    SweepRow row;
    row.entry = todo[n];
    row.delta = plan.base.horizon / todo[n].steps;
    if (!done[n]) {
      row.error = errors[n];
      return row;
    }
    const SweepRun &run = *done[n];
    const EnergyBreakdown &e = run.result.report.final_energy;
    row.ok = true;
    row.iterations = run.result.report.iterations;
    row.reason = run.result.report.reason;
    row.kinetic = e.kinetic;
    row.congestion = e.congestion;
    row.running_potential = e.running_potential;
    row.terminal_potential = e.terminal_potential;
    row.total = e.total;
    if (done[ref_idx] && !ref_slices.empty()) {
      double sum = 0.0;
      int count = 0;
      for (int k = 1; k < run.result.ensemble.steps; ++k) {
        const auto rho = density_at(*done[ref_idx], ref_slices, k * run.result.ensemble.delta());
        if (!rho) continue;
        sum += semi_discrete_w2(*run.scenario.grid, *rho, run.result.ensemble.slice(k));
        ++count;
      }
      row.w2_to_reference = count ? sum / count : std::nan("");
    }
    return row;
  };
  for (std::size_t n = 0; n < ref_idx; ++n) rep.rows.push_back(make_row(n));
  rep.reference = make_row(ref_idx);

  std::ostringstream sum;
  sum << "schedule " << to_string(plan.schedule) << ", reference N=" << plan.reference.particles
      << " eps=" << format_number(plan.reference.epsilon) << " M=" << plan.reference.steps << "\n";
  sum << "delta^(2/r')/eps ratios: " << join(rep.schedule_ratios)
      << (nonincreasing(rep.schedule_ratios) ? " (decreasing)\n" : " (NOT decreasing)\n");
  std::vector<double> gaps, w2s;
  for (const SweepRow &r : rep.rows) {
    if (!r.ok) {
      sum << "N=" << r.entry.particles << " failed: " << r.error << "\n";
      continue;
    }
    gaps.push_back(std::abs(r.total - rep.reference.total));
    w2s.push_back(r.w2_to_reference);
  }
  if (rep.reference.ok) {
    sum << "|J_N - J_ref|: " << join(gaps) << (nonincreasing(gaps) ? " (nonincreasing)\n" : " (not monotone)\n");
    sum << "mean W2 to reference: " << join(w2s) << (nonincreasing(w2s) ? " (nonincreasing)\n" : " (not monotone)\n");
  } else {
    sum << "reference failed: " << rep.reference.error << "\n";
  }

  std::vector<ConvergenceRow> conv;
  const bool smooth = !plan.base.congestion.is_hard();
  if (plan.convergence && smooth && done[ref_idx]) {
    std::vector<SweepRun> ok_runs;
    for (std::size_t n = 0; n < ref_idx; ++n)
      if (done[n]) ok_runs.push_back(*done[n]);
    conv = projection_convergence(ok_runs, *done[ref_idx]);
    std::vector<double> errs, cgaps;
    for (const ConvergenceRow &c : conv) {
      errs.push_back(c.lp_error);
      cgaps.push_back(c.congestion_gap);
    }
    sum << "L^p projection error: " << join(errs) << (nonincreasing(errs) ? " (nonincreasing)\n" : " (not monotone)\n");
    sum << "congestion-integral gap: " << join(cgaps)
        << (nonincreasing(cgaps) ? " (nonincreasing)\n" : " (not monotone)\n");
  } else if (plan.convergence) {
    sum << "projection convergence skipped: needs a quadratic or power model and a reference run\n";
  }
  rep.summary = sum.str();

  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    if (ec) throw SolverError(ErrorCode::io, "cannot create " + out_dir->string());
    std::ofstream csv(*out_dir / "sweep.csv", std::ios::binary);
    if (!csv) throw SolverError(ErrorCode::io, "cannot write sweep.csv");
    csv << "role,particles,steps,epsilon,delta,status,iterations,termination,kinetic,congestion,running_potential,"
           "terminal_potential,total,w2_to_reference\n";
    auto line = [&](const char *role, const SweepRow &r) {
      csv << role << ',' << r.entry.particles << ',' << r.entry.steps << ',' << format_number(r.entry.epsilon) << ','
          << format_number(r.delta) << ',' << (r.ok ? "ok" : "failed") << ',' << r.iterations << ','
          << (r.ok ? to_string(r.reason) : "") << ',' << format_number(r.kinetic) << ','
          << format_number(r.congestion) << ',' << format_number(r.running_potential) << ','
          << format_number(r.terminal_potential) << ',' << format_number(r.total) << ','
          << format_number(r.w2_to_reference) << '\n';
    };
    for (const SweepRow &r : rep.rows) line("run", r);
    line("reference", rep.reference);
    if (!conv.empty()) write_convergence_csv(*out_dir / "convergence.csv", conv);
    std::ofstream txt(*out_dir / "summary.txt", std::ios::binary);
    txt << rep.summary;
  }
  if (runs_out) {
    runs_out->clear();
    for (std::size_t n = 0; n <= ref_idx; ++n)
      if (done[n]) runs_out->push_back(*done[n]);
  }
  return rep;
}

std::vector<ConvergenceRow> projection_convergence(const std::vector<SweepRun> &runs, const SweepRun &reference) {
  const CongestionModel &model = reference.scenario.context.model;
  if (model.kind != CongestionKind::quadratic && model.kind != CongestionKind::power)
    throw SolverError(ErrorCode::invalid_input, "projection_convergence: needs a quadratic or power model");
  const double p = model.kind == CongestionKind::power ? model.exponent : 2.0;
  const std::vector<DensityField> ref_slices = slice_densities(reference);

  std::vector<ConvergenceRow> out;
  for (const SweepRun &run : runs) {
    if (!same_grid(*run.scenario.grid, *reference.scenario.grid))
      throw SolverError(ErrorCode::invalid_input, "projection_convergence: mismatched grids");
    const std::vector<DensityField> slices = slice_densities(run);
    const double delta = run.result.ensemble.delta();
    ConvergenceRow row;
    row.particles = run.entry.particles;
    row.epsilon = run.entry.epsilon;
    row.exponent = p;
    double err = 0.0, f_run = 0.0, f_ref = 0.0;
    for (std::size_t k = 0; k < slices.size(); ++k) {
      const auto ref = density_at(reference, ref_slices, (k + 1) * delta);
      if (!ref) continue;
      const DensityField &rho = slices[k];
      for (std::size_t n = 0; n < rho.values.size(); ++n) {
        err += delta * rho.pixel_area * std::pow(std::abs(rho.values[n] - ref->values[n]), p);
        f_run += delta * rho.pixel_area * primal(model, rho.values[n]);
        f_ref += delta * rho.pixel_area * primal(model, ref->values[n]);
      }
    }
    row.lp_error = std::pow(err, 1.0 / p);
    row.congestion_integral = f_run;
    row.congestion_gap = std::abs(f_run - f_ref);
    out.push_back(row);
  }
  return out;
}

void write_convergence_csv(const fs::path &path, const std::vector<ConvergenceRow> &rows) {
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw SolverError(ErrorCode::io, "cannot write " + path.string());
  csv << "particles,epsilon,exponent,lp_error,congestion_integral,congestion_gap\n";
  for (const ConvergenceRow &r : rows)
    csv << r.particles << ',' << format_number(r.epsilon) << ',' << format_number(r.exponent) << ','
        << format_number(r.lp_error) << ',' << format_number(r.congestion_integral) << ','
        << format_number(r.congestion_gap) << '\n';
}

}  // namespace mfg
