#include "mfgc/congestion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dual_exponent(double m) { return m / (m - 1.0); }

void check_region(const CongestionModel &model, Region region) {
  if (region == Region::outside && !model.two_region_model())
    throw std::invalid_argument("congestion: outside region requested for a single-region model");
}

}  // namespace

double CongestionModel::density_cap(Region region) const {
  switch (kind) {
    case CongestionKind::hard_cap:
      return cap;
    case CongestionKind::hard_cap_two_region:
      return region == Region::inside ? cap : outside_cap;
    default:
      return kInf;
  }
}

void CongestionModel::validate() const {
  switch (kind) {
    case CongestionKind::hard_cap:
      if (!(cap > 0.0)) throw std::invalid_argument("congestion: cap must be positive");
      break;
    case CongestionKind::hard_cap_two_region:
      if (!(cap > 0.0)) throw std::invalid_argument("congestion: cap must be positive");
      if (!(outside_cap >= 0.0) || outside_cap > cap)
        throw std::invalid_argument("congestion: outside_cap must lie in [0, cap]");
      break;
    case CongestionKind::power:
      if (!(exponent >= 2.0) || !std::isfinite(exponent))
        throw std::invalid_argument("congestion: power exponent must be >= 2");
      break;
    case CongestionKind::quadratic:
      if (!(strong_convexity > 0.0)) throw std::invalid_argument("congestion: strong_convexity must be positive");
      break;
  }
}

RadialProfile radial_profile(const CongestionModel &model) {
  switch (model.kind) {
    case CongestionKind::power: {
      const double q = dual_exponent(model.exponent);
      return {1.0 / q, q};
    }
    case CongestionKind::quadratic:
      return {0.5 / model.strong_convexity, 2.0};
    default:
      return {1.0, 1.0};
  }
}

double conjugate(const CongestionModel &model, double p, Region region) {
  check_region(model, region);
  const double pp = std::max(p, 0.0);
  switch (model.kind) {
    case CongestionKind::hard_cap:
    case CongestionKind::hard_cap_two_region:
      return model.density_cap(region) * pp;
    case CongestionKind::power: {
      const double q = dual_exponent(model.exponent);
      return std::pow(pp, q) / q;
    }
    case CongestionKind::quadratic:
      return pp * pp / (2.0 * model.strong_convexity);
  }
  return 0.0;
}

double conjugate_deriv(const CongestionModel &model, double p, Region region) {
  check_region(model, region);
  if (!(p > 0.0)) return 0.0;
  switch (model.kind) {
    case CongestionKind::hard_cap:
    case CongestionKind::hard_cap_two_region:
      return model.density_cap(region);
    case CongestionKind::power:
      return std::pow(p, 1.0 / (model.exponent - 1.0));
    case CongestionKind::quadratic:
      return p / model.strong_convexity;
  }
  return 0.0;
}

double primal(const CongestionModel &model, double rho, Region region) {
  check_region(model, region);
  if (rho < 0.0) return kInf;
  switch (model.kind) {
    case CongestionKind::hard_cap:
    case CongestionKind::hard_cap_two_region:
      return rho <= model.density_cap(region) ? 0.0 : kInf;
    case CongestionKind::power:
      return std::pow(rho, model.exponent) / model.exponent;
    case CongestionKind::quadratic:
      return 0.5 * model.strong_convexity * rho * rho;
  }
  return kInf;
}

std::string to_string(CongestionKind kind) {
  switch (kind) {
    case CongestionKind::hard_cap:
      return "hard_cap";
    case CongestionKind::hard_cap_two_region:
      return "hard_cap_two_region";
    case CongestionKind::power:
      return "power";
    case CongestionKind::quadratic:
      return "quadratic";
  }
  return "unknown";
}

CongestionKind congestion_kind_from_string(const std::string &name) {
  if (name == "hard_cap") return CongestionKind::hard_cap;
  if (name == "hard_cap_two_region") return CongestionKind::hard_cap_two_region;
  if (name == "power") return CongestionKind::power;
  if (name == "quadratic") return CongestionKind::quadratic;
  throw std::invalid_argument("unknown congestion kind '" + name + "'");
}

}  // namespace mfg
