#pragma once

#include "svre/common.hpp"
#include "svre/normal.hpp"
#include "svre/problem.hpp"
#include "svre/references.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace svre {

struct McEstimate {
  double p_hat = 0.0;
  double cov = std::numeric_limits<double>::infinity();
  std::uint64_t n_samples = 0;
  std::uint64_t hits = 0;
};

inline constexpr std::uint64_t kMcBatch = 1u << 16;

/// Crude Monte Carlo P[g(X) <= 0], X standard normal; c.o.v. sqrt((1-p)/(n p)).
///
/// Samples come in fixed batches with their own substream seeded from
/// (seed, batch), so the result does not depend on the thread count.
inline McEstimate crude_mc(const LimitStateProblem& problem, std::uint64_t n_samples, std::uint64_t seed,
                           unsigned threads = 1) {
  if (n_samples < 1) throw ConfigError("crude_mc: n_samples must be >= 1");
  const std::uint64_t batches = (n_samples + kMcBatch - 1) / kMcBatch;
  std::vector<std::uint64_t> hits(batches, 0);
  auto work = [&](std::uint64_t first, std::uint64_t stride) {
    const int d = problem.dim();
    Vector x(d);
    for (std::uint64_t b = first; b < batches; b += stride) {
      std::mt19937_64 rng(mix_seed(seed, b));
      std::normal_distribution<double> z;
      const std::uint64_t count = std::min(kMcBatch, n_samples - b * kMcBatch);
      std::uint64_t local = 0;
      for (std::uint64_t s = 0; s < count; ++s) {
        for (int j = 0; j < d; ++j) x[j] = z(rng);
        if (problem.eval(x) <= 0.0) ++local;
      }
      hits[b] = local;
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  McEstimate out;
  out.n_samples = n_samples;
  for (auto h : hits) out.hits += h;
  out.p_hat = static_cast<double>(out.hits) / static_cast<double>(n_samples);
  if (out.hits > 0) out.cov = std::sqrt((1.0 - out.p_hat) / (static_cast<double>(n_samples) * out.p_hat));
  return out;
}

/// Importance sampling with an equal-covariance Gaussian mixture proposal
/// sum_j w_j N(c_j, I). Unbiased for any centers; efficient when the centers
/// sit at the design points of the failure domain.
inline McEstimate mixture_is(const LimitStateProblem& problem, const std::vector<Vector>& centers,
                             const std::vector<double>& mix_weights, std::uint64_t n_samples, std::uint64_t seed) {
  if (centers.empty() || centers.size() != mix_weights.size()) throw ConfigError("mixture_is: need matching centers and weights");
  const int d = problem.dim();
  double total = 0.0;
  for (double w : mix_weights) total += w;
  std::vector<double> cum;
  for (double w : mix_weights) cum.push_back((cum.empty() ? 0.0 : cum.back()) + w / total);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  std::uint64_t hits = 0;
  Vector x(d);
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    const double r = pick(rng);
    std::size_t comp = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    comp = std::min(comp, centers.size() - 1);
    for (int j = 0; j < d; ++j) x[j] = centers[comp][j] + z(rng);
    if (problem.eval(x) > 0.0) continue;
    // w = p0(x) / sum_j w_j N(x | c_j, I) = 1 / sum_j w_j exp(x.c_j - |c_j|^2/2)
    double denom = 0.0;
    for (std::size_t j = 0; j < centers.size(); ++j)
      denom += mix_weights[j] / total * std::exp(x.dot(centers[j]) - 0.5 * centers[j].squaredNorm());
    const double w = 1.0 / denom;
    sum += w;
    sum2 += w * w;
    ++hits;
  }
  McEstimate out;
  out.n_samples = n_samples;
  out.hits = hits;
  const double n = static_cast<double>(n_samples);
  out.p_hat = sum / n;
  if (sum > 0.0) out.cov = std::sqrt(std::max(0.0, sum2 / n - out.p_hat * out.p_hat) / n) / out.p_hat;
  return out;
}

/// Most probable failure point by the HL-RF iteration from x0.
inline Vector design_point(const LimitStateFunction& fn, Vector x, int max_iter = 100, double tol = 1e-10) {
  for (int it = 0; it < max_iter; ++it) {
    const auto [g, grad] = fn.value_and_gradient(x);
    const double gg = grad.squaredNorm();
    if (!(gg > 0.0)) break;
    const Vector next = (grad.dot(x) - g) / gg * grad;
    const double change = (next - x).norm();
    x = next;
    if (change < tol * std::max(1.0, x.norm())) break;
  }
  return x;
}

/// Design points of the four-branch system g = min(g1..g4) + gamma.
inline std::vector<Vector> fourbranch_design_points(double gamma) {
  const double a = (3.0 + gamma) / std::numbers::sqrt2;  // branches 1/2: u = +-(3 + gamma)
  const double b = (3.5 + gamma / std::numbers::sqrt2) / std::numbers::sqrt2;  // branches 3/4
  std::vector<Vector> pts(4, Vector(2));
  pts[0] << a, a;
  pts[1] << -a, -a;
  pts[2] << -b, b;
  pts[3] << b, -b;
  return pts;
}

struct RunRecord {
  std::uint64_t seed = 0;
  double p_hat = 0.0;
  double delta_hat = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::uint64_t gradient_calls = 0;
  std::uint64_t model_calls = 0;
  bool converged = true;
};

struct BenchmarkResult {
  std::vector<RunRecord> estimates;
  double p_ref = 0.0;
  double rrmse = 0.0;
  double rel_bias = 0.0;
  double rel_std = 0.0;
  double mean_p_hat = 0.0;
  int excluded_runs = 0;
  int used_runs = 0;
  double mean_gradient_calls = 0.0;
  double mean_model_calls = 0.0;
};

/// Relative RMSE with its bias/standard-deviation split (population variance).
/// Runs with delta_hat above the threshold or that did not converge are excluded.
inline BenchmarkResult rrmse(const std::vector<RunRecord>& estimates, double p_ref, double exclusion_threshold = 0.5) {
  if (!(p_ref > 0.0)) throw ConfigError("rrmse: reference probability must be positive");
  BenchmarkResult out;
  out.estimates = estimates;
  out.p_ref = p_ref;
  std::vector<double> kept;
  for (const auto& r : estimates) {
    out.mean_gradient_calls += static_cast<double>(r.gradient_calls);
    out.mean_model_calls += static_cast<double>(r.model_calls);
    if (!r.converged || !(r.delta_hat <= exclusion_threshold)) {
      ++out.excluded_runs;
      continue;
    }
    kept.push_back(r.p_hat);
  }
  if (!estimates.empty()) {
    out.mean_gradient_calls /= static_cast<double>(estimates.size());
    out.mean_model_calls /= static_cast<double>(estimates.size());
  }
  if (kept.empty()) throw ConfigError("benchmark degenerate: all runs excluded");
  out.used_runs = static_cast<int>(kept.size());
  double mean = 0.0;
  for (double p : kept) mean += p;
  mean /= static_cast<double>(kept.size());
  double var = 0.0;
  for (double p : kept) var += (p - mean) * (p - mean);
  var /= static_cast<double>(kept.size());
  out.mean_p_hat = mean;
  out.rel_bias = (mean - p_ref) / p_ref;
  out.rel_std = std::sqrt(var) / p_ref;
  out.rrmse = std::sqrt(out.rel_bias * out.rel_bias + out.rel_std * out.rel_std);
  return out;
}

}  // namespace svre
