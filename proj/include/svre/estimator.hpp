#pragma once

#include "svre/common.hpp"
#include "svre/kernel.hpp"
#include "svre/normal.hpp"
#include "svre/problem.hpp"
#include "svre/sampling.hpp"
#include "svre/smoothing.hpp"
#include "svre/transport.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace svre {

enum class InitMethod { sobol, lhs };
enum class Termination { converged, max_iterations, aborted };

inline std::string to_string(InitMethod m) { return m == InitMethod::sobol ? "sobol" : "lhs"; }
inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iterations: return "max_iterations";
    default: return "aborted";
  }
}

struct SvreConfig {
  int n = 1000;
  int n_grad = 20;
  double delta_thresh = 5.0;
  int t_max = 200;
  std::uint64_t seed = 1;
  InitMethod init = InitMethod::sobol;
  /// Random digital shift of the Sobol points; off reproduces the raw sequence.
  bool scramble = true;
  SmootherParams smoother = SmootherParams::from_mass(0.9, 1e-3);
  KernelConfig kernel{};
  TransportConfig transport{};

  /// t_max = 0 is accepted and means "no transport" (plain Monte Carlo).
  void validate() const {
    if (n < 2) throw ConfigError("svre.n must be >= 2");
    if (n_grad < 1) throw ConfigError("svre.n_grad must be >= 1");
    if (!(delta_thresh > 0.0)) throw ConfigError("svre.delta_thresh must be positive");
    if (t_max < 0) throw ConfigError("svre.t_max must be >= 0");
    mu_from_mass(smoother.P, smoother.sigma);
    kernel.validate();
    transport.validate();
  }
};

struct EstimateReport {
  double p_hat = 0.0;
  double delta_hat = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int steps = 0;
  std::uint64_t model_calls = 0;
  std::uint64_t gradient_calls = 0;
  Termination termination = Termination::max_iterations;
  double final_delta_w = std::numeric_limits<double>::infinity();
  std::string message;
  std::vector<std::string> warnings;
  std::vector<StepDiagnostics> history;
  Vector weights;
  ParticleMatrix final_positions;
  bool has_estimate() const { return termination != Termination::aborted; }
};

/// n_grad + n standard-normal starting points; log_q = log p0 at each point.
inline Ensemble init_ensemble(const SvreConfig& cfg, int dim, std::vector<std::string>* warnings = nullptr) {
  if (dim < 1) throw ConfigError("init_ensemble: dimension must be >= 1");
  const int total = cfg.n + cfg.n_grad;
  ParticleMatrix uniform;
  if (cfg.init == InitMethod::sobol && dim <= kSobolMaxDim) {
    uniform = sobol_uniform(total, dim, cfg.scramble, cfg.seed);
  } else {
    if (cfg.init == InitMethod::sobol && warnings)
      warnings->push_back("dimension " + std::to_string(dim) + " exceeds the Sobol table; using Latin hypercube");
    uniform = latin_hypercube_uniform(total, dim, cfg.seed);
  }
  Ensemble ens;
  ens.positions = to_standard_normal(uniform);
  ens.n_inducing = cfg.n_grad;
  ens.log_q.resize(total);
  for (int i = 0; i < total; ++i) ens.log_q[i] = normal::log_density(ens.positions.row(i));
  ens.rmsprop_v2.setZero(total, dim);
  ens.step = 0;
  return ens;
}

/// Coefficient of variation of importance weights, delta_w = std(w) / mean(w)
/// (population convention), and the relative effective sample size 1/(1+delta_w^2).
struct WeightStat {
  double delta_w = std::numeric_limits<double>::infinity();
  double ress = 0.0;
};

inline WeightStat weight_cov_stat(const Vector& weights) {
  const double n = static_cast<double>(weights.size());
  const double sum = weights.sum();
  if (!(sum > 0.0) || weights.size() == 0) return {};
  const double ratio = n * weights.squaredNorm() / (sum * sum);
  const double delta_w = std::sqrt(std::max(0.0, ratio - 1.0));
  return {delta_w, 1.0 / (1.0 + delta_w * delta_w)};
}

/// Importance weights I[g <= 0] p0(x) / q(x) from tracked log-densities.
inline Vector importance_weights(const Vector& g_values, const Vector& log_q, const ParticleMatrix& positions) {
  if (g_values.size() != log_q.size() || g_values.size() != positions.rows())
    throw ConfigError("importance_weights: inconsistent input lengths");
  Vector w(g_values.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(log_q[i])) throw AbortError("non-finite tracked log-density");
    w[i] = g_values[i] <= 0.0 ? std::exp(normal::log_density(positions.row(i)) - log_q[i]) : 0.0;
  }
  return w;
}

struct IsEstimate {
  double p_hat = 0.0;
  double delta_hat = std::numeric_limits<double>::infinity();
  Vector weights;
  bool no_failures = true;
};

/// p_hat = mean(w); delta_hat = sqrt(sum w^2 / (sum w)^2 - 1/n).
inline IsEstimate is_estimate(const Vector& g_values, const Vector& log_q, const ParticleMatrix& positions) {
  IsEstimate out;
  out.weights = importance_weights(g_values, log_q, positions);
  const double n = static_cast<double>(out.weights.size());
  const double sum = out.weights.sum();
  out.p_hat = sum / n;
  if (sum > 0.0) {
    out.no_failures = false;
    out.delta_hat = std::sqrt(std::max(0.0, out.weights.squaredNorm() / (sum * sum) - 1.0 / n));
  }
  return out;
}

/// Transport n_grad + n particles towards the smoothed optimal importance
/// density and return the importance-sampling estimate over the n estimation
/// particles.
///
/// Each iteration evaluates g and grad g at the inducing particles. Their hard
/// indicator weights (with the tracked log_q) give the stopping statistic
/// delta_w; once delta_w <= delta_thresh the loop ends without moving.
/// Otherwise the particles take one transport step. After at most t_max
/// iterations g is evaluated once at every estimation particle.
inline EstimateReport run_svre(const LimitStateProblem& problem, const SvreConfig& cfg) {
  cfg.validate();
  EstimateReport report;
  const std::uint64_t model0 = problem.model_calls();
  const std::uint64_t grad0 = problem.gradient_calls();
  auto tally = [&] {
    report.model_calls = problem.model_calls() - model0;
    report.gradient_calls = problem.gradient_calls() - grad0;
  };

  Ensemble ens = init_ensemble(cfg, problem.dim(), &report.warnings);
  if (cfg.transport.normalization == Normalization::rmsprop &&
      cfg.transport.rmsprop_jacobian == RmspropJacobian::chain && !cfg.transport.exact_determinant(problem.dim()))
    report.warnings.push_back("chain RMSProp Jacobian needs exact determinants; using the frozen correction");
  try {
    for (int it = 0; it < cfg.t_max; ++it) {
      const InducingEvaluation eval = evaluate_inducing(ens, problem, cfg.smoother);
      ++report.iterations;
      const ParticleMatrix inducing = ens.inducing();
      const Vector w = importance_weights(eval.g_values, ens.log_q.head(ens.n_inducing), inducing);
      report.final_delta_w = weight_cov_stat(w).delta_w;
      if (report.final_delta_w <= cfg.delta_thresh) {
        report.termination = Termination::converged;
        break;
      }
      StepOutcome next = transport_step(ens, eval, cfg.kernel, cfg.transport);
      ens = std::move(next.ensemble);
      report.history.push_back(next.diagnostics);
      ++report.steps;
    }
    if (report.termination != Termination::converged) report.termination = Termination::max_iterations;

    const int n_est = ens.n_estimation();
    Vector g(n_est);
    const ParticleMatrix est = ens.estimation();
    for (int i = 0; i < n_est; ++i) {
      g[i] = problem.eval(est.row(i).transpose());
      if (!std::isfinite(g[i])) throw AbortError("non-finite limit-state value at estimation particle");
    }
    IsEstimate estimate = is_estimate(g, ens.log_q.tail(n_est), est);
    report.p_hat = estimate.p_hat;
    report.delta_hat = estimate.delta_hat;
    report.weights = std::move(estimate.weights);
    report.final_positions = est;
    if (estimate.no_failures) report.message = "no failure samples";
  } catch (const AbortError& e) {
    report.termination = Termination::aborted;
    report.message = e.what();
    report.p_hat = 0.0;
    report.delta_hat = std::numeric_limits<double>::infinity();
    report.weights.resize(0);
    report.final_positions = ens.estimation();
  }
  tally();
  return report;
}

}  // namespace svre
