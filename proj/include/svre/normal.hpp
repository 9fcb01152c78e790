#pragma once

#include "svre/common.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <numbers>

namespace svre::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse CDF; u must lie in (0, 1).
inline double quantile(double u) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, u);
}

/// Log-density of the d-dimensional standard normal.
template <typename Derived>
double log_density(const Eigen::MatrixBase<Derived>& x) {
  return -0.5 * x.squaredNorm() - static_cast<double>(x.size()) * kLogSqrt2Pi;
}

}  // namespace svre::normal
