#pragma once

#include <memory>
#include <vector>

#include "mfgc/congestion.hpp"
#include "mfgc/eikonal.hpp"
#include "mfgc/grid.hpp"
#include "mfgc/moreau.hpp"

namespace mfg {

/// N piecewise-affine particle paths sampled at times k * delta, k = 0..M.
struct TrajectoryEnsemble {
  int steps = 0;      ///< M
  int particles = 0;  ///< N
  double mass = 0.0;  ///< per particle
  double horizon = 0.0;
  std::vector<Vec2> positions;  ///< row k holds slice k, size (M+1) * N

  double delta() const { return horizon / steps; }
  Vec2 &at(int k, int i) { return positions[static_cast<std::size_t>(k) * particles + i]; }
  const Vec2 &at(int k, int i) const { return positions[static_cast<std::size_t>(k) * particles + i]; }
  DiscreteMeasure slice(int k) const;

  static TrajectoryEnsemble stationary(std::vector<Vec2> initial, double mass, double horizon, int steps);
  /// Throws SolverError(invalid_input) on shape mismatches or non-finite entries.
  void validate() const;
};

/// L(p) = |p|^r / r.
struct Lagrangian {
  double exponent = 2.0;

  double value(Vec2 p) const;
  /// |p|^(r-2) p, with the value 0 at p = 0.
  Vec2 gradient(Vec2 p) const;
};

enum class PotentialKind { zero, quadratic, ring_well };

/// Analytic potential catalog:
///   quadratic  scale * |x - center|^2
///   ring_well  scale * (|x - center|^2 - radius^2)^2
struct PotentialTerm {
  PotentialKind kind = PotentialKind::zero;
  Vec2 center;
  double radius = 0.0;
  double scale = 1.0;

  PotentialSample eval(Vec2 x) const;
  /// Minimizer used by the straight-to-target initialization.
  Vec2 argmin_near(Vec2 from) const;
};

/// Running potential V and terminal potential Phi. Phi is analytic or a
/// sampled travel-time field.
struct PotentialModel {
  PotentialTerm running;
  PotentialTerm terminal;
  std::shared_ptr<const PotentialField> terminal_field;

  PotentialSample running_at(Vec2 x) const { return running.eval(x); }
  /// A field is read through the C^1 Hermite sampler; outside its node
  /// rectangle Phi continues with slope 1 / (outside speed) from the nearest
  /// point of that rectangle.
  PotentialSample terminal_at(Vec2 x) const;
  bool has_running() const { return running.kind != PotentialKind::zero; }
  Vec2 terminal_target(Vec2 from) const;
};

PotentialKind potential_kind_from_string(const std::string &name);
std::string to_string(PotentialKind kind);

struct EnergyContext {
  const GridDomain *grid = nullptr;
  CongestionModel model;
  double epsilon = 0.1;
  Lagrangian lagrangian;
  PotentialModel potential;
  bool congestion = true;
  Quadrature quadrature = Quadrature::exact;
  SolveOptions dual{1e-9, 500, DualMethod::newton, false};
};

/// Per-slice dual weights reused across evaluations (slice k at index k-1).
struct WarmStarts {
  std::vector<std::vector<double>> slices;
};

struct EnergyBreakdown {
  double kinetic = 0.0;
  double congestion = 0.0;
  double running_potential = 0.0;
  double terminal_potential = 0.0;
  double total = 0.0;
  /// d total / d x_i^k for k = 1..M at index (k-1) * N + i.
  std::vector<Vec2> gradient;
  /// Moreau solutions of slices 1..M-1 (empty when congestion is off).
  std::vector<MoreauSolution> per_slice_moreau;

  double gradient_sup_norm() const;
};

/// J = w sum_i sum_k delta L((x^{k+1}-x^k)/delta) + delta sum_{k=1}^{M-1} F_eps(slice k)
///     + w delta sum_i sum_{k=1}^{M-1} V(x_i^k) + w sum_i Phi(x_i^M), with its exact gradient.
/// The slice solves run concurrently; `warm` is read and updated when given.
EnergyBreakdown evaluate(const TrajectoryEnsemble &ensemble, const EnergyContext &ctx, WarmStarts *warm = nullptr);

}  // namespace mfg
