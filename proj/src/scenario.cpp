#include "mfgc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfgc/errors.hpp"

namespace mfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string &msg) { throw SolverError(ErrorCode::invalid_input, "config: " + msg); }

void only_keys(const json &obj, const std::string &where, std::initializer_list<const char *> allowed) {
  if (!obj.is_object()) schema_error(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[key, value] : obj.items())
    if (!ok.count(key)) schema_error("unknown key '" + where + "." + key + "'");
}

template <class T>
T get(const json &obj, const std::string &where, const char *key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception &) {
    schema_error(where + "." + key + " has the wrong type");
  }
}

template <class T>
T require(const json &obj, const std::string &where, const char *key) {
  if (!obj.contains(key)) schema_error("missing key '" + where + "." + key + "'");
  return get<T>(obj, where, key, T{});
}

Vec2 to_vec(const json &j, const std::string &where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    schema_error(where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect to_rect(const json &j, const std::string &where) {
  if (!j.is_array() || j.size() != 4) schema_error(where + " must be [x0, x1, y0, y1]");
  for (const auto &v : j)
    if (!v.is_number()) schema_error(where + " must be [x0, x1, y0, y1]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json from_rect(const Rect &r) { return json::array({r.x0, r.x1, r.y0, r.y1}); }
json from_vec(Vec2 v) { return json::array({v.x, v.y}); }

PotentialSpec parse_potential(const json &j, const std::string &where) {
  only_keys(j, where, {"kind", "center", "radius", "scale", "speed_inside", "speed_outside", "sources"});
  PotentialSpec p;
  p.kind = require<std::string>(j, where, "kind");
  if (j.contains("center")) p.center = to_vec(j.at("center"), where + ".center");
  p.radius = get<double>(j, where, "radius", 0.0);
  p.scale = get<double>(j, where, "scale", 1.0);
  p.speed_inside = get<double>(j, where, "speed_inside", 1.0);
  p.speed_outside = get<double>(j, where, "speed_outside", 1.0);
  if (j.contains("sources")) {
    if (!j.at("sources").is_array()) schema_error(where + ".sources must be a list of points");
    for (const auto &s : j.at("sources")) p.sources.push_back(to_vec(s, where + ".sources"));
  }
  return p;
}

json dump_potential(const PotentialSpec &p) {
  if (p.kind == "eikonal") {
    json src = json::array();
    for (const Vec2 &s : p.sources) src.push_back(from_vec(s));
    return {{"kind", p.kind}, {"speed_inside", p.speed_inside}, {"speed_outside", p.speed_outside}, {"sources", src}};
  }
  return {{"kind", p.kind}, {"center", from_vec(p.center)}, {"radius", p.radius}, {"scale", p.scale}};
}

PotentialTerm to_term(const PotentialSpec &p) {
  return {potential_kind_from_string(p.kind), p.center, p.radius, p.scale};
}

std::string quadrature_name(Quadrature q) { return q == Quadrature::exact ? "exact" : "pixel"; }

Quadrature quadrature_from_string(const std::string &s) {
  if (s == "exact") return Quadrature::exact;
  if (s == "pixel") return Quadrature::pixel;
  schema_error("unknown quadrature '" + s + "'");
}

double region_capacity(const ScenarioConfig &c) {
  if (!c.congestion.is_hard()) return std::numeric_limits<double>::infinity();
  double area = 0.0;
  std::vector<Vec2> corners;
  for (const Rect &r : c.shape.rects) {
    area += r.area();
    corners.insert(corners.end(), {{r.x0, r.y0}, {r.x1, r.y0}, {r.x0, r.y1}, {r.x1, r.y1}});
  }
  double cap = c.congestion.cap * area;
  if (c.congestion.two_region_model())
    cap += c.congestion.outside_cap * (ConvexPolygon::hull_of(corners).area() - area);
  return cap;
}

// golden-ratio hue walk, fixed saturation and lightness
std::string owner_color(int owner, double lightness) {
  const double hue = std::fmod(owner * 0.618033988749895, 1.0) * 6.0;
  const double s = 0.55, l = lightness;
  const double c = (1 - std::abs(2 * l - 1)) * s;
  const double x = c * (1 - std::abs(std::fmod(hue, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = l - c / 2;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

std::string svg_open(const Rect &b) {
  const double pad = 0.02 * std::max(b.width(), b.height());
  const double scale = 800.0 / std::max(b.width(), b.height());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_number(scale * (b.width() + 2 * pad))
    << "\" height=\"" << format_number(scale * (b.height() + 2 * pad)) << "\" viewBox=\"" << format_number(b.x0 - pad)
    << ' ' << format_number(-b.y1 - pad) << ' ' << format_number(b.width() + 2 * pad) << ' '
    << format_number(b.height() + 2 * pad) << "\">\n"
    << "<g transform=\"scale(1,-1)\">\n";
  return s.str();
}

std::string svg_domain(const Shape &shape, double stroke) {
  std::ostringstream s;
  for (const Rect &r : shape.rects)
    s << "<rect class=\"domain\" x=\"" << format_number(r.x0) << "\" y=\"" << format_number(r.y0) << "\" width=\""
      << format_number(r.width()) << "\" height=\"" << format_number(r.height())
      << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"" << format_number(stroke) << "\"/>\n";
  return s.str();
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverError(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw SolverError(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string &m) { throw SolverError(ErrorCode::invalid_input, "config: " + m); };
  if (shape.rects.empty()) bad("domain needs at least one rectangle");
  for (const Rect &r : shape.rects)
    if (r.empty()) bad("degenerate domain rectangle");
  if (!(resolution > 0.0)) bad("domain.resolution must be positive");
  try {
    congestion.validate();
    optimizer.validate();
  } catch (const std::invalid_argument &e) {
    bad(e.what());
  }
  if (particles < 1) bad("particles.count must be at least 1");
  if (!(total_mass > 0.0)) bad("particles.total_mass must be positive");
  if (!(horizon > 0.0) || steps < 1) bad("dynamics needs horizon > 0 and steps >= 1");
  if (!(epsilon > 0.0)) bad("dynamics.epsilon must be positive");
  if (!(lagrangian_exponent > 1.0)) bad("dynamics.lagrangian_exponent must exceed 1");
  if (!(dual_tol > 0.0) || dual_max_iters < 1) bad("dual needs tol > 0 and max_iters >= 1");
  if (frame_stride < 0) bad("output.frame_stride must be nonnegative");
  if (running.kind == "eikonal") bad("the running potential cannot be an eikonal field");
  for (const PotentialSpec *p : {&running, &terminal}) {
    if (p->kind == "eikonal") {
      if (!(p->speed_inside > 0.0) || !(p->speed_outside > 0.0)) bad("eikonal speeds must be positive");
      if (p->sources.empty()) bad("eikonal potential needs at least one source");
      continue;
    }
    try {
      potential_kind_from_string(p->kind);
    } catch (const std::invalid_argument &e) {
      bad(e.what());
    }
  }
  const double capacity = region_capacity(*this);
  if (total_mass >= capacity)
    throw SolverError(ErrorCode::feasibility, "config: total_mass " + format_number(total_mass) +
                                                  " does not fit the density capacity " + format_number(capacity));
  if (layout.empty() && particles > 1) bad("particles.layout must be a nondegenerate rectangle");
  for (const Vec2 &p : layout_points(layout, particles))
    if (!shape.contains(p))
      bad("initial layout point (" + format_number(p.x) + ", " + format_number(p.y) + ") lies outside the domain");
}

ScenarioConfig parse_config(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw SolverError(ErrorCode::io, std::string("config: parse error: ") + e.what());
  }
  only_keys(j, "config", {"name", "domain", "congestion", "potential", "particles", "dynamics", "optimizer", "dual", "output"});
  ScenarioConfig c;
  c.name = get<std::string>(j, "config", "name", c.name);

  if (!j.contains("domain")) schema_error("missing key 'domain'");
  const json &d = j.at("domain");
  only_keys(d, "domain", {"rectangles", "resolution"});
  if (!d.contains("rectangles") || !d.at("rectangles").is_array()) schema_error("domain.rectangles must be a list");
  for (const auto &r : d.at("rectangles")) c.shape.rects.push_back(to_rect(r, "domain.rectangles"));
  c.resolution = get<double>(d, "domain", "resolution", c.resolution);

  if (j.contains("congestion")) {
    const json &g = j.at("congestion");
    only_keys(g, "congestion", {"kind", "cap", "outside_cap", "exponent", "strong_convexity"});
    try {
      c.congestion.kind = congestion_kind_from_string(get<std::string>(g, "congestion", "kind", "hard_cap"));
    } catch (const std::invalid_argument &e) {
      schema_error(e.what());
    }
    c.congestion.cap = get<double>(g, "congestion", "cap", 1.0);
    c.congestion.outside_cap = get<double>(g, "congestion", "outside_cap", 0.0);
    c.congestion.exponent = get<double>(g, "congestion", "exponent", 2.0);
    c.congestion.strong_convexity = get<double>(g, "congestion", "strong_convexity", 1.0);
  }

  if (j.contains("potential")) {
    const json &p = j.at("potential");
    only_keys(p, "potential", {"running", "terminal"});
    if (p.contains("running")) c.running = parse_potential(p.at("running"), "potential.running");
    if (p.contains("terminal")) c.terminal = parse_potential(p.at("terminal"), "potential.terminal");
  }

  if (!j.contains("particles")) schema_error("missing key 'particles'");
  const json &pa = j.at("particles");
  only_keys(pa, "particles", {"count", "total_mass", "layout"});
  c.particles = require<int>(pa, "particles", "count");
  c.total_mass = require<double>(pa, "particles", "total_mass");
  if (!pa.contains("layout")) schema_error("missing key 'particles.layout'");
  c.layout = to_rect(pa.at("layout"), "particles.layout");

  if (!j.contains("dynamics")) schema_error("missing key 'dynamics'");
  const json &dy = j.at("dynamics");
  only_keys(dy, "dynamics", {"lagrangian_exponent", "horizon", "steps", "epsilon"});
  c.lagrangian_exponent = get<double>(dy, "dynamics", "lagrangian_exponent", 2.0);
  c.horizon = require<double>(dy, "dynamics", "horizon");
  c.steps = require<int>(dy, "dynamics", "steps");
  c.epsilon = require<double>(dy, "dynamics", "epsilon");

  c.optimizer.grad_tol = 1e-5 * c.total_mass;
  if (j.contains("optimizer")) {
    const json &o = j.at("optimizer");
    only_keys(o, "optimizer", {"memory", "max_iters", "grad_tol", "wolfe_c1", "wolfe_c2", "max_line_search", "init_strategy"});
    OptimizerConfig &oc = c.optimizer;
    oc.memory = get<int>(o, "optimizer", "memory", oc.memory);
    oc.max_iters = get<int>(o, "optimizer", "max_iters", oc.max_iters);
    oc.grad_tol = get<double>(o, "optimizer", "grad_tol", oc.grad_tol);
    oc.wolfe_c1 = get<double>(o, "optimizer", "wolfe_c1", oc.wolfe_c1);
    oc.wolfe_c2 = get<double>(o, "optimizer", "wolfe_c2", oc.wolfe_c2);
    oc.max_line_search = get<int>(o, "optimizer", "max_line_search", oc.max_line_search);
    try {
      oc.init_strategy = init_strategy_from_string(get<std::string>(o, "optimizer", "init_strategy", "stationary"));
    } catch (const std::invalid_argument &e) {
      schema_error(e.what());
    }
  }

  if (j.contains("dual")) {
    const json &du = j.at("dual");
    only_keys(du, "dual", {"tol", "max_iters", "quadrature"});
    c.dual_tol = get<double>(du, "dual", "tol", c.dual_tol);
    c.dual_max_iters = get<int>(du, "dual", "max_iters", c.dual_max_iters);
    c.quadrature = quadrature_from_string(get<std::string>(du, "dual", "quadrature", "exact"));
  }

  if (j.contains("output")) {
    const json &ou = j.at("output");
    only_keys(ou, "output", {"directory", "frame_stride", "density"});
    c.output_dir = get<std::string>(ou, "output", "directory", c.output_dir);
    c.frame_stride = get<int>(ou, "output", "frame_stride", c.frame_stride);
    c.write_density = get<bool>(ou, "output", "density", c.write_density);
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolverError(ErrorCode::io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ScenarioConfig &c) {
  json rects = json::array();
  for (const Rect &r : c.shape.rects) rects.push_back(from_rect(r));
  json j;
  j["name"] = c.name;
  j["domain"] = {{"rectangles", rects}, {"resolution", c.resolution}};
  j["congestion"] = {{"kind", to_string(c.congestion.kind)},
                     {"cap", c.congestion.cap},
                     {"outside_cap", c.congestion.outside_cap},
                     {"exponent", c.congestion.exponent},
                     {"strong_convexity", c.congestion.strong_convexity}};
  j["potential"] = {{"running", dump_potential(c.running)}, {"terminal", dump_potential(c.terminal)}};
  j["particles"] = {{"count", c.particles}, {"total_mass", c.total_mass}, {"layout", from_rect(c.layout)}};
  j["dynamics"] = {{"lagrangian_exponent", c.lagrangian_exponent},
                   {"horizon", c.horizon},
                   {"steps", c.steps},
                   {"epsilon", c.epsilon}};
  j["optimizer"] = {{"memory", c.optimizer.memory},
                    {"max_iters", c.optimizer.max_iters},
                    {"grad_tol", c.optimizer.grad_tol},
                    {"wolfe_c1", c.optimizer.wolfe_c1},
                    {"wolfe_c2", c.optimizer.wolfe_c2},
                    {"max_line_search", c.optimizer.max_line_search},
                    {"init_strategy", to_string(c.optimizer.init_strategy)}};
  j["dual"] = {{"tol", c.dual_tol}, {"max_iters", c.dual_max_iters}, {"quadrature", quadrature_name(c.quadrature)}};
  j["output"] = {{"directory", c.output_dir}, {"frame_stride", c.frame_stride}, {"density", c.write_density}};
  return j.dump(2) + "\n";
}

void save_config(const ScenarioConfig &config, const fs::path &path) { write_text(path, dump_config(config)); }

std::vector<Vec2> layout_points(const Rect &r, int count) {
  std::vector<Vec2> pts;
  if (count <= 0) return pts;
  if (count == 1) return {r.center()};
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)) - 1e-12));
  const int rows = (count + cols - 1) / cols;
  for (int n = 0; n < count; ++n) {
    const int ix = n % cols, iy = n / cols;
    const double tx = cols > 1 ? static_cast<double>(ix) / (cols - 1) : 0.5;
    const double ty = rows > 1 ? static_cast<double>(iy) / (rows - 1) : 0.5;
    pts.push_back({r.x0 + tx * r.width(), r.y0 + ty * r.height()});
  }
  return pts;
}

Scenario build_scenario(const ScenarioConfig &config) {
  config.validate();
  Scenario s;
  s.config = config;
  s.grid = std::make_shared<const GridDomain>(build_grid(config.shape, config.resolution));
  EnergyContext &ctx = s.context;
  ctx.grid = s.grid.get();
  ctx.model = config.congestion;
  ctx.epsilon = config.epsilon;
  ctx.lagrangian.exponent = config.lagrangian_exponent;
  ctx.potential.running = to_term(config.running);
  if (config.terminal.kind == "eikonal")
    ctx.potential.terminal_field = std::make_shared<const PotentialField>(
        fast_march(*s.grid, config.terminal.speed_inside, config.terminal.speed_outside, config.terminal.sources));
  else
    ctx.potential.terminal = to_term(config.terminal);
  ctx.quadrature = config.quadrature;
  ctx.dual = SolveOptions{config.dual_tol, config.dual_max_iters, DualMethod::newton, false};
  return s;
}

TrajectoryEnsemble initial_ensemble(const Scenario &s) {
  const ScenarioConfig &c = s.config;
  TrajectoryEnsemble e =
      TrajectoryEnsemble::stationary(layout_points(c.layout, c.particles), c.particle_mass(), c.horizon, c.steps);
  if (c.optimizer.init_strategy == InitStrategy::straight_to_target)
    for (int i = 0; i < e.particles; ++i) {
      const Vec2 from = e.at(0, i);
      const Vec2 to = s.context.potential.terminal_target(from);
      for (int k = 1; k <= e.steps; ++k) e.at(k, i) = from + (static_cast<double>(k) / e.steps) * (to - from);
    }
  return e;
}

RunDiagnostics diagnose(const Scenario &s, const TrajectoryEnsemble &e, const EnergyBreakdown &energy) {
  RunDiagnostics d;
  if (!energy.per_slice_moreau.empty()) {
    const MoreauProblem problem(*s.grid, s.context.model, s.context.epsilon, s.context.quadrature);
    for (std::size_t k = 0; k < energy.per_slice_moreau.size(); ++k)
      d.max_density = std::max(
          d.max_density, projected_density(problem, energy.per_slice_moreau[k], e.slice(static_cast<int>(k) + 1)).max());
  }
  std::size_t outside = 0;
  for (const Vec2 &p : e.positions) {
    if (!s.config.shape.contains(p)) ++outside;
    d.max_hull_distance = std::max(d.max_hull_distance, distance_to_polygon(s.grid->hull(), p));
  }
  d.outside_fraction = static_cast<double>(outside) / static_cast<double>(e.positions.size());
  return d;
}

EnergyCsv::EnergyCsv(const fs::path &path) : out_(path, std::ios::binary) {
  if (!out_) throw SolverError(ErrorCode::io, "cannot write " + path.string());
  out_ << "iteration,kinetic,congestion,running_potential,terminal_potential,total,grad_sup\n";
}

void EnergyCsv::row(int iteration, const EnergyBreakdown &e) {
  out_ << iteration << ',' << format_number(e.kinetic) << ',' << format_number(e.congestion) << ','
       << format_number(e.running_potential) << ',' << format_number(e.terminal_potential) << ','
       << format_number(e.total) << ',' << format_number(e.gradient_sup_norm()) << '\n';
  out_.flush();
}

RunResult run_scenario(const Scenario &s, const fs::path *out_dir) {
  std::unique_ptr<EnergyCsv> trace;
  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    if (ec) throw SolverError(ErrorCode::io, "cannot create " + out_dir->string() + ": " + ec.message());
    trace = std::make_unique<EnergyCsv>(*out_dir / "energy.csv");
  }
  IterationCallback cb;
  if (trace) cb = [&](int it, const TrajectoryEnsemble &, const EnergyBreakdown &e) { trace->row(it, e); };
  OptimizeResult opt = minimize(initial_ensemble(s), s.context, s.config.optimizer, cb);
  RunResult r{std::move(opt.ensemble), std::move(opt.report), {}};
  r.diagnostics = diagnose(s, r.ensemble, r.report.final_energy);
  if (out_dir) write_outputs(*out_dir, s, r);
  return r;
}

void write_trajectories_csv(const fs::path &path, const TrajectoryEnsemble &e) {
  std::ostringstream s;
  s << "step,time,particle_id,x,y\n";
  for (int k = 0; k <= e.steps; ++k)
    for (int i = 0; i < e.particles; ++i)
      s << k << ',' << format_number(k * e.delta()) << ',' << i << ',' << format_number(e.at(k, i).x) << ','
        << format_number(e.at(k, i).y) << '\n';
  write_text(path, s.str());
}

void write_trajectories_svg(const fs::path &path, const Scenario &sc, const TrajectoryEnsemble &e) {
  const Rect &b = sc.grid->bounds();
  const double stroke = 0.003 * std::max(b.width(), b.height());
  std::ostringstream s;
  s << svg_open(b) << svg_domain(sc.config.shape, 2 * stroke);
  for (int i = 0; i < e.particles; ++i) {
    s << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"" << owner_color(i, 0.45) << "\" stroke-width=\""
      << format_number(stroke) << "\" points=\"";
    for (int k = 0; k <= e.steps; ++k)
      s << (k ? " " : "") << format_number(e.at(k, i).x) << ',' << format_number(e.at(k, i).y);
    s << "\"/>\n";
  }
  s << "</g>\n</svg>\n";
  write_text(path, s.str());
}

std::string render_cells_svg(const MoreauProblem &problem, const MoreauSolution &sol, const DiscreteMeasure &mu,
                             bool arrows) {
  const GridDomain &g = problem.grid();
  const CellAssignment a = assign_cells(g, mu.positions, sol.weights, problem.epsilon(), problem.mask());
  const double h = g.pixel_size();
  const Rect &b = g.bounds();
  std::ostringstream s;
  s << svg_open(b);
  for (int iy = 0; iy < g.ny(); ++iy) {
    int ix = 0;
    while (ix < g.nx()) {
      const std::size_t k = g.index(ix, iy);
      const int owner = a.owner[k];
      const bool charged = owner != kNoOwner && a.cost_at_owner[k] < 0.0;
      int end = ix + 1;
      while (end < g.nx()) {
        const std::size_t j = g.index(end, iy);
        if (a.owner[j] != owner || (owner != kNoOwner && (a.cost_at_owner[j] < 0.0) != charged)) break;
        ++end;
      }
      if (owner != kNoOwner) {
        s << "<rect" << (charged ? " class=\"charged\"" : "") << " x=\"" << format_number(b.x0 + ix * h) << "\" y=\""
          << format_number(b.y0 + iy * h) << "\" width=\"" << format_number((end - ix) * h) << "\" height=\""
          << format_number(h) << "\" fill=\"" << owner_color(owner, charged ? 0.5 : 0.85) << "\"/>\n";
      }
      ix = end;
    }
  }
  const double dot = 0.004 * std::max(b.width(), b.height());
  s << svg_domain(g.shape(), dot / 2);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec2 y = mu.positions[i];
    s << "<circle class=\"particle\" cx=\"" << format_number(y.x) << "\" cy=\"" << format_number(y.y) << "\" r=\""
      << format_number(dot) << "\" fill=\"#000\"/>\n";
    if (arrows)
      s << "<line class=\"arrow\" x1=\"" << format_number(y.x) << "\" y1=\"" << format_number(y.y) << "\" x2=\""
        << format_number(sol.barycenter[i].x) << "\" y2=\"" << format_number(sol.barycenter[i].y)
        << "\" stroke=\"#c00\" stroke-width=\"" << format_number(dot / 2) << "\"/>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

void write_density_csv(const fs::path &path, const DensityField &d) {
  std::ostringstream s;
  s << "# x0=" << format_number(d.bounds.x0) << " y0=" << format_number(d.bounds.y0)
    << " pixel_size=" << format_number(std::sqrt(d.pixel_area)) << " nx=" << d.nx << " ny=" << d.ny
    << " (row iy, column ix)\n";
  for (int iy = 0; iy < d.ny; ++iy) {
    for (int ix = 0; ix < d.nx; ++ix)
      s << (ix ? "," : "") << format_number(d.values[static_cast<std::size_t>(iy) * d.nx + ix]);
    s << '\n';
  }
  write_text(path, s.str());
}

void write_potential_csv(const fs::path &path, const PotentialField &f) {
  std::ostringstream s;
  s << "# x0=" << format_number(f.bounds.x0) << " y0=" << format_number(f.bounds.y0)
    << " pixel_size=" << format_number(f.pixel_size()) << " nx=" << f.nx << " ny=" << f.ny << " (row iy, column ix)\n";
  for (int iy = 0; iy < f.ny; ++iy) {
    for (int ix = 0; ix < f.nx; ++ix) s << (ix ? "," : "") << format_number(f.values[f.index(ix, iy)]);
    s << '\n';
  }
  write_text(path, s.str());
}

std::string render_potential_svg(const PotentialField &f, const Shape &shape) {
  double hi = 0.0;
  for (double v : f.values) hi = std::max(hi, v);
  if (!(hi > 0.0)) hi = 1.0;
  const double h = f.pixel_size();
  std::ostringstream s;
  s << svg_open(f.bounds);
  // 16 gray-blue bands, one rect per horizontal run
  auto band = [&](double v) { return std::min(15, static_cast<int>(v / hi * 16)); };
  for (int iy = 0; iy < f.ny; ++iy)
    for (int ix = 0; ix < f.nx;) {
      const int b = band(f.values[f.index(ix, iy)]);
      int end = ix + 1;
      while (end < f.nx && band(f.values[f.index(end, iy)]) == b) ++end;
      const int c = 20 + b * 15;
      char color[8];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", c / 2, c, std::min(255, c + 40));
      s << "<rect x=\"" << format_number(f.bounds.x0 + ix * h) << "\" y=\"" << format_number(f.bounds.y0 + iy * h)
        << "\" width=\"" << format_number((end - ix) * h) << "\" height=\"" << format_number(h) << "\" fill=\""
        << color << "\"/>\n";
      ix = end;
    }
  const double stroke = 0.004 * std::max(f.bounds.width(), f.bounds.height());
  s << svg_domain(shape, stroke);
  for (const Vec2 &p : f.sources)
    s << "<circle class=\"source\" cx=\"" << format_number(p.x) << "\" cy=\"" << format_number(p.y) << "\" r=\""
      << format_number(3 * stroke) << "\" fill=\"#f80\"/>\n";
  s << "</g>\n</svg>\n";
  return s.str();
}

void write_cells_csv(const fs::path &path, const DiscreteMeasure &mu, const MoreauSolution &sol) {
  std::ostringstream s;
  s << "id,x,y,weight,cell_mass,barycenter_x,barycenter_y,gradient_x,gradient_y\n";
  for (std::size_t i = 0; i < mu.size(); ++i)
    s << i << ',' << format_number(mu.positions[i].x) << ',' << format_number(mu.positions[i].y) << ','
      << format_number(sol.weights[i]) << ',' << format_number(sol.cell_mass[i]) << ','
      << format_number(sol.barycenter[i].x) << ',' << format_number(sol.barycenter[i].y) << ','
      << format_number(sol.position_gradient[i].x) << ',' << format_number(sol.position_gradient[i].y) << '\n';
  write_text(path, s.str());
}

void write_outputs(const fs::path &dir, const Scenario &sc, const RunResult &r) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SolverError(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  write_trajectories_csv(dir / "trajectories.csv", r.ensemble);
  write_trajectories_svg(dir / "trajectories.svg", sc, r.ensemble);

  const auto &slices = r.report.final_energy.per_slice_moreau;
  if (sc.config.frame_stride > 0 && !slices.empty()) {
    const MoreauProblem problem(*sc.grid, sc.context.model, sc.context.epsilon, sc.context.quadrature);
    for (int k = sc.config.frame_stride; k < r.ensemble.steps; k += sc.config.frame_stride) {
      const MoreauSolution &sol = slices[k - 1];
      const DiscreteMeasure mu = r.ensemble.slice(k);
      write_text(dir / ("frame_" + std::to_string(k) + ".svg"), render_cells_svg(problem, sol, mu, false));
      if (sc.config.write_density)
        write_density_csv(dir / ("density_" + std::to_string(k) + ".csv"), projected_density(problem, sol, mu));
    }
  }

  const EnergyBreakdown &e = r.report.final_energy;
  json summary = {{"name", sc.config.name},
                  {"termination", to_string(r.report.reason)},
                  {"iterations", r.report.iterations},
                  {"evaluations", r.report.evaluations},
                  {"kinetic", e.kinetic},
                  {"congestion", e.congestion},
                  {"running_potential", e.running_potential},
                  {"terminal_potential", e.terminal_potential},
                  {"total", e.total},
                  {"grad_sup", e.gradient_sup_norm()},
                  {"max_density", r.diagnostics.max_density},
                  {"outside_fraction", r.diagnostics.outside_fraction},
                  {"max_hull_distance", r.diagnostics.max_hull_distance}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
}

std::vector<Vec2> read_points(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw SolverError(ErrorCode::io, "cannot read points " + path.string());
  std::vector<Vec2> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Vec2 p;
    if (!(ls >> p.x >> p.y)) {
      if (pts.empty() && lineno == 1) continue;  // header
      throw SolverError(ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": expected x,y");
    }
    pts.push_back(p);
  }
  return pts;
}

}  // namespace mfg
