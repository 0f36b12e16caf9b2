#pragma once

#include <string>

namespace mfg {

enum class CongestionKind { hard_cap, hard_cap_two_region, power, quadratic };

enum class Region { inside, outside };

/// Convex congestion integrand f on densities, with conjugate f* and (f*)'.
///
///   hard_cap             f = indicator of [0, cap]                 f*(p) = cap p+
///   hard_cap_two_region  as hard_cap inside the domain, cap
///                        outside_cap on conv(domain) \ domain
///   power                f(rho) = rho^m / m                        f*(p) = p+^m' / m'
///   quadratic            f(rho) = c rho^2 / 2                      f*(p) = p+^2 / (2c)
///
/// Every f vanishes at 0 and is +inf on negative densities, so f*(p) = 0 for
/// p <= 0.
struct CongestionModel {
  CongestionKind kind = CongestionKind::hard_cap;
  double cap = 1.0;
  double outside_cap = 0.0;
  double exponent = 2.0;
  double strong_convexity = 1.0;

  static CongestionModel hard_cap(double cap = 1.0) { return {CongestionKind::hard_cap, cap}; }
  static CongestionModel two_region(double cap, double outside_cap) {
    return {CongestionKind::hard_cap_two_region, cap, outside_cap};
  }
  static CongestionModel power(double m) { return {CongestionKind::power, 1.0, 0.0, m}; }
  static CongestionModel quadratic(double c) { return {CongestionKind::quadratic, 1.0, 0.0, 2.0, c}; }

  bool two_region_model() const { return kind == CongestionKind::hard_cap_two_region; }
  bool is_hard() const { return kind == CongestionKind::hard_cap || kind == CongestionKind::hard_cap_two_region; }
  /// Density bound for a region (infinite for power and quadratic).
  double density_cap(Region region) const;
  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

/// f*(p) = coef * p+^q. Exact integration works with this normalized form;
/// for hard-cap kinds coef is 1 and the region cap enters as a weight.
struct RadialProfile {
  double coef = 1.0;
  double q = 1.0;
};

RadialProfile radial_profile(const CongestionModel &model);

double conjugate(const CongestionModel &model, double p, Region region = Region::inside);
double conjugate_deriv(const CongestionModel &model, double p, Region region = Region::inside);
/// f(rho); +inf outside the effective domain.
double primal(const CongestionModel &model, double rho, Region region = Region::inside);

std::string to_string(CongestionKind kind);
CongestionKind congestion_kind_from_string(const std::string &name);

}  // namespace mfg
