#pragma once

#include "svre/common.hpp"

#include <cmath>
#include <numbers>

namespace svre {

/// Logistic smoothing of the failure indicator I[g <= 0].
///
/// F(g) = (1 + tanh(z)) / 2 with z = -pi/sqrt(3) * (mu + g) / (2 sigma), i.e. the
/// CDF of a logistic variable with location -mu and standard deviation sigma
/// evaluated at -g. mu is chosen so that F(0) = P.
struct SmootherParams {
  double P = 0.9;
  double sigma = 1e-3;
  double mu = 0.0;

  static SmootherParams from_mass(double P, double sigma);
};

inline double mu_from_mass(double P, double sigma) {
  if (!(P > 0.0 && P < 1.0)) throw ConfigError("smoother.P must lie in (0, 1)");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("smoother.sigma must be positive");
  return -std::numbers::sqrt3 * sigma / std::numbers::pi * std::log(P / (1.0 - P));
}

inline SmootherParams SmootherParams::from_mass(double P, double sigma) {
  return SmootherParams{P, sigma, mu_from_mass(P, sigma)};
}

namespace detail {

inline double smoother_argument(double g_value, const SmootherParams& p) {
  return -std::numbers::pi / std::numbers::sqrt3 * (p.mu + g_value) / (2.0 * p.sigma);
}

/// 1 - tanh(z), saturated to its limits for |z| > 40.
inline double one_minus_tanh(double z) {
  if (z > 40.0) return 0.0;
  if (z < -40.0) return 2.0;
  return 2.0 / (1.0 + std::exp(2.0 * z));
}

}  // namespace detail

inline double smooth_indicator(double g_value, const SmootherParams& params) {
  return 0.5 * (1.0 + std::tanh(detail::smoother_argument(g_value, params)));
}

/// log F, computed as -log(1 + exp(-2z)) so it stays finite in the safe tail.
inline double log_smooth_indicator(double g_value, const SmootherParams& params) {
  const double z = detail::smoother_argument(g_value, params);
  return z > 0.0 ? -std::log1p(std::exp(-2.0 * z)) : 2.0 * z - std::log1p(std::exp(2.0 * z));
}

/// d log F / dg; the x-gradient is this times grad g.
inline double log_smooth_indicator_slope(double g_value, const SmootherParams& params) {
  const double z = detail::smoother_argument(g_value, params);
  return -std::numbers::pi / (2.0 * std::numbers::sqrt3 * params.sigma) * detail::one_minus_tanh(z);
}

inline Vector log_smooth_indicator_grad(double g_value, const VectorRef& g_grad,
                                        const SmootherParams& params) {
  return log_smooth_indicator_slope(g_value, params) * g_grad;
}

}  // namespace svre
