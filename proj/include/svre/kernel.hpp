#pragma once

#include "svre/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace svre {

enum class BandwidthStrategy { median, fixed };

struct KernelConfig {
  BandwidthStrategy strategy = BandwidthStrategy::fixed;
  double fixed_length = 10.0;

  void validate() const {
    if (strategy == BandwidthStrategy::fixed && !(fixed_length > 0.0 && std::isfinite(fixed_length)))
      throw ConfigError("kernel.length must be positive when kernel.strategy is fixed");
  }
};

// Isotropic Gaussian kernel k(x, y) = exp(-|x - y|^2 / (2 ell^2)) and its derivatives.

inline double rbf(const VectorRef& x, const VectorRef& y, double ell) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * ell * ell));
}

inline Vector rbf_grad_x(const VectorRef& x, const VectorRef& y, double ell) {
  return -(x - y) * (rbf(x, y, ell) / (ell * ell));
}

inline Vector rbf_grad_y(const VectorRef& x, const VectorRef& y, double ell) {
  return (x - y) * (rbf(x, y, ell) / (ell * ell));
}

/// Mixed derivative d^2 k / dx dy = (I / ell^2 - r r^T / ell^4) k with r = x - y.
inline Matrix rbf_hess_xy(const VectorRef& x, const VectorRef& y, double ell) {
  const Vector r = x - y;
  const double k = rbf(x, y, ell);
  const double l2 = ell * ell;
  Matrix h = -(r * r.transpose()) * (k / (l2 * l2));
  h.diagonal().array() += k / l2;
  return h;
}

/// ell = median(|x_i - x_j|) / sqrt(2 log n) over all n(n-1)/2 pairs.
/// An even number of pairs takes the mean of the two middle distances.
inline double median_bandwidth(const ParticleMatrix& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw ConfigError("median_bandwidth: need at least two samples");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((samples.row(i) - samples.row(j)).norm());
  if (*std::max_element(dist.begin(), dist.end()) <= 0.0)
    throw AbortError("median_bandwidth: degenerate ensemble (all samples identical)");
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  if (!(median > 0.0)) throw AbortError("median_bandwidth: degenerate ensemble (median distance is zero)");
  return median / std::sqrt(2.0 * std::log(static_cast<double>(n)));
}

inline double select_bandwidth(const KernelConfig& cfg, const ParticleMatrix& inducing) {
  if (cfg.strategy == BandwidthStrategy::fixed) return cfg.fixed_length;
  return median_bandwidth(inducing);
}

inline std::string to_string(BandwidthStrategy s) { return s == BandwidthStrategy::median ? "median" : "fixed"; }

}  // namespace svre
