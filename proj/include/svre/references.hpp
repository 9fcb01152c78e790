#pragma once

#include "svre/common.hpp"
#include "svre/normal.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace svre {

namespace detail {

/// Composite Simpson on [a, b], doubling the panel count until two successive
/// results agree to rel_tol.
inline double simpson(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  long panels = 16;
  auto rule = [&](long n) {
    const double h = (b - a) / static_cast<double>(n);
    double sum = f(a) + f(b);
    for (long i = 1; i < n; ++i) sum += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
  };
  double previous = rule(panels);
  for (int level = 0; level < 20; ++level) {
    panels *= 2;
    const double current = rule(panels);
    if (std::abs(current - previous) <= rel_tol * std::abs(current)) return current;
    previous = current;
  }
  throw AbortError("simpson: quadrature did not converge");
}

}  // namespace detail

/// P[beta + (kappa/4)(x1-x2)^2 - sum(x)/sqrt(d) <= 0] for x standard normal.
///
/// Rotating onto u = sum(x)/sqrt(d) and v = (x1-x2)/sqrt(2) leaves
/// E_v[Phi(-beta - (kappa/2) v^2)], independent of d. The even integrand is
/// integrated with the full-line trapezoid rule (spectrally accurate here),
/// halving the step until the relative change drops below rel_tol.
inline double quadratic_reference(double beta, double kappa, double rel_tol = 1e-13) {
  if (!(kappa >= 0.0)) throw ConfigError("quadratic_reference: kappa must be >= 0");
  if (!std::isfinite(beta)) throw ConfigError("quadratic_reference: beta must be finite");
  auto integrand = [&](double v) { return normal::cdf(-beta - 0.5 * kappa * v * v) * normal::pdf(v); };
  constexpr double kCutoff = 40.0;  // pdf(40) underflows to 0
  auto trapezoid = [&](double h) {
    double sum = 0.5 * integrand(0.0);
    for (double v = h; v <= kCutoff; v += h) sum += integrand(v);
    return 2.0 * h * sum;
  };
  double h = 0.5;
  double previous = trapezoid(h);
  for (int level = 0; level < 16; ++level) {
    h *= 0.5;
    const double current = trapezoid(h);
    if (std::abs(current - previous) <= rel_tol * std::abs(current)) return current;
    previous = current;
  }
  throw AbortError("quadratic_reference: quadrature did not converge");
}

/// P[min(g1..g4) <= -gamma] for the four-branch system, x standard normal.
///
/// With u = (x1+x2)/sqrt2 and v = (x1-x2)/sqrt2: branches 3/4 fail outright
/// for |v| >= 3.5 + gamma/sqrt2; otherwise failure needs |u| >= 3 + gamma + 0.2 v^2.
inline double fourbranch_reference(double gamma, double rel_tol = 1e-12) {
  const double edge = 3.5 + gamma / std::numbers::sqrt2;
  if (edge <= 0.0) return 1.0;
  auto integrand = [&](double v) {
    const double a = 3.0 + gamma + 0.2 * v * v;
    const double inner = a <= 0.0 ? 1.0 : 2.0 * normal::cdf(-a);
    return inner * normal::pdf(v);
  };
  return 2.0 * normal::cdf(-edge) + detail::simpson(integrand, -edge, edge, rel_tol);
}

}  // namespace svre
