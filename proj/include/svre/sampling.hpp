#pragma once

#include "svre/common.hpp"
#include "svre/normal.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace svre {

/// Largest dimension covered by the bundled Sobol direction numbers.
inline constexpr int kSobolMaxDim = 3667;

namespace detail {

inline double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// n points of the d-dimensional Sobol sequence in (0,1)^d, origin skipped.
/// With scramble set, every coordinate is XORed with a random digital shift
/// drawn from the seed, which makes each point marginally uniform.
inline ParticleMatrix sobol_uniform(int n, int dim, bool scramble, std::uint64_t seed) {
  if (dim < 1 || dim > kSobolMaxDim) throw ConfigError("sobol_uniform: dimension out of range");
  boost::random::sobol engine(static_cast<std::size_t>(dim));
  std::vector<std::uint64_t> shift(static_cast<std::size_t>(dim), 0);
  if (scramble) {
    std::mt19937_64 rng(seed);
    for (auto& s : shift) s = rng();
  }
  ParticleMatrix out(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = detail::to_open_unit(engine() ^ shift[static_cast<std::size_t>(j)]);
  return out;
}

/// Latin hypercube: each coordinate visits every one of the n strata once.
inline ParticleMatrix latin_hypercube_uniform(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  ParticleMatrix out(n, dim);
  std::vector<int> strata(static_cast<std::size_t>(n));
  for (int j = 0; j < dim; ++j) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < n; ++i) {
      double u = (strata[static_cast<std::size_t>(i)] + jitter(rng)) / n;
      out(i, j) = std::clamp(u, 0x1.0p-60, 1.0 - 0x1.0p-53);
    }
  }
  return out;
}

/// Componentwise inverse standard-normal CDF.
inline ParticleMatrix to_standard_normal(const ParticleMatrix& uniform) {
  return uniform.unaryExpr([](double u) { return normal::quantile(u); });
}

}  // namespace svre
