#pragma once

#include "svre/common.hpp"
#include "svre/kernel.hpp"
#include "svre/normal.hpp"
#include "svre/problem.hpp"
#include "svre/smoothing.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace svre {

enum class Normalization { rmsprop, l2 };
enum class RatePolicy { constant, adaptive };
enum class DetMode { exact, trace, automatic };
/// frozen: v_{t-1} treated as a per-particle constant in grad T.
/// chain: v_{t-1} differentiated as a function of the current position (needs full Jacobians).
enum class RmspropJacobian { chain, frozen };

struct TransportConfig {
  Normalization normalization = Normalization::l2;
  double base_rate = 1.0;
  RatePolicy rate_policy = RatePolicy::constant;
  DetMode det_mode = DetMode::automatic;
  double corridor_lo = 0.5;
  double corridor_hi = 1.5;
  double alpha = 0.9;
  double nugget = 1e-6;
  RmspropJacobian rmsprop_jacobian = RmspropJacobian::chain;
  /// automatic mode uses exact determinants up to this dimension.
  int exact_det_max_dim = 50;

  bool exact_determinant(int dim) const {
    if (det_mode == DetMode::automatic) return dim <= exact_det_max_dim;
    return det_mode == DetMode::exact;
  }

  void validate() const {
    if (!(base_rate > 0.0) || !std::isfinite(base_rate)) throw ConfigError("transport.base_rate must be positive");
    if (!(corridor_lo > 0.0 && corridor_lo < 1.0)) throw ConfigError("transport.corridor lower bound must lie in (0, 1)");
    if (!(corridor_hi > 1.0) || !std::isfinite(corridor_hi)) throw ConfigError("transport.corridor upper bound must exceed 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("transport.alpha must lie in (0, 1)");
    if (!(nugget > 0.0)) throw ConfigError("transport.nugget must be positive");
  }
};

/// Particle system of one run. Rows [0, n_inducing) are inducing particles,
/// the rest estimation particles; the split never changes.
struct Ensemble {
  ParticleMatrix positions;
  Vector log_q;
  ParticleMatrix rmsprop_v2;
  /// d(v^2)/dx per particle, chain mode only
  std::vector<Matrix> rmsprop_v2_jac;
  int n_inducing = 0;
  int step = 0;

  int size() const { return static_cast<int>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }
  int n_estimation() const { return size() - n_inducing; }
  ParticleMatrix inducing() const { return positions.topRows(n_inducing); }
  ParticleMatrix estimation() const { return positions.bottomRows(n_estimation()); }
};

/// Stein velocity at m query points. phi_jac holds d x d Jacobians with
/// J(a, b) = d phi_a / d y_b. When the field is built without full Jacobians,
/// jac_diag (m x d) and jac_along (m) carry the contractions needed for traces:
/// diag(J) and u^T J u with u = phi / |phi|.
struct VelocityField {
  ParticleMatrix phi;
  std::vector<Matrix> phi_jac;
  ParticleMatrix jac_diag;
  Vector jac_along;

  bool has_full_jacobian() const { return !phi_jac.empty(); }
};

struct StepDiagnostics {
  double base_rate_used = 0.0;
  double bandwidth = 0.0;
  double min_det = 1.0;
  double max_det = 1.0;
  double velocity_norm_min = 0.0;
  double velocity_norm_mean = 0.0;
  double velocity_norm_max = 0.0;
  int stationary_particles = 0;
  int rejections = 0;
  bool exact_determinant = true;
  bool chain_jacobian = false;
};

/// Target score grad log F(x) + grad log p0(x) with p0 standard normal.
/// Costs one model call and one gradient call.
inline Vector score_target(const LimitStateProblem& problem, const SmootherParams& smoother, const VectorRef& x) {
  const EvalRecord rec = problem.eval_with_gradient(x);
  if (!std::isfinite(rec.g_value) || !rec.gradient->allFinite())
    throw AbortError("non-finite limit-state value or gradient during score evaluation");
  return log_smooth_indicator_grad(rec.g_value, *rec.gradient, smoother) - x;
}

struct InducingEvaluation {
  Vector g_values;
  ParticleMatrix scores;
};

inline InducingEvaluation evaluate_inducing(const Ensemble& ens, const LimitStateProblem& problem,
                                            const SmootherParams& smoother) {
  InducingEvaluation out{Vector(ens.n_inducing), ParticleMatrix(ens.n_inducing, ens.dim())};
  for (int i = 0; i < ens.n_inducing; ++i) {
    const Vector x = ens.positions.row(i).transpose();
    const EvalRecord rec = problem.eval_with_gradient(x);
    if (!std::isfinite(rec.g_value) || !rec.gradient->allFinite())
      throw AbortError("non-finite limit-state value or gradient at inducing particle " + std::to_string(i));
    out.g_values[i] = rec.g_value;
    out.scores.row(i) = (log_smooth_indicator_grad(rec.g_value, *rec.gradient, smoother) - x).transpose();
  }
  return out;
}

/// phi(y) = (1/N) sum_i [k(x_i, y) s_i + grad_{x_i} k(x_i, y)] over the N
/// inducing particles x_i with scores s_i.
inline VelocityField stein_velocity(const ParticleMatrix& inducing, const ParticleMatrix& scores, double ell,
                                    const ParticleMatrix& query, bool full_jacobian = true) {
  if (inducing.rows() != scores.rows() || inducing.cols() != scores.cols() || query.cols() != inducing.cols())
    throw ConfigError("stein_velocity: inconsistent shapes");
  if (inducing.rows() < 1) throw ConfigError("stein_velocity: need at least one inducing particle");
  if (!(ell > 0.0)) throw ConfigError("stein_velocity: bandwidth must be positive");

  const Eigen::Index m = query.rows();
  const Eigen::Index d = query.cols();
  const Eigen::Index n_ind = inducing.rows();
  const double inv_n = 1.0 / static_cast<double>(n_ind);
  const double inv_l2 = 1.0 / (ell * ell);

  VelocityField field;
  field.phi.setZero(m, d);
  if (full_jacobian) {
    field.phi_jac.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  } else {
    field.jac_diag.setZero(m, d);
    field.jac_along.setZero(m);
  }

  Vector r(d), lead(d), phi(d), kvals(n_ind);
  for (Eigen::Index q = 0; q < m; ++q) {
    phi.setZero();
    for (Eigen::Index i = 0; i < n_ind; ++i) {
      r = query.row(q).transpose() - inducing.row(i).transpose();
      const double k = std::exp(-0.5 * r.squaredNorm() * inv_l2);
      kvals[i] = k;
      phi.noalias() += k * scores.row(i).transpose() + (k * inv_l2) * r;
      if (full_jacobian) {
        // s_i (dk/dy)^T + (I/l^2 - r r^T/l^4) k  ==  -(k/l^2) (s_i + r/l^2) r^T + (k/l^2) I
        Matrix& jac = field.phi_jac[static_cast<std::size_t>(q)];
        lead = scores.row(i).transpose() + inv_l2 * r;
        jac.noalias() -= (k * inv_l2) * lead * r.transpose();
        jac.diagonal().array() += k * inv_l2;
      } else {
        auto diag = field.jac_diag.row(q);
        diag.array() += (k * inv_l2) * (1.0 - (scores.row(i).array() + inv_l2 * r.transpose().array()) *
                                                  r.transpose().array());
      }
    }
    phi *= inv_n;
    field.phi.row(q) = phi.transpose();
    if (full_jacobian) {
      field.phi_jac[static_cast<std::size_t>(q)] *= inv_n;
      continue;
    }
    field.jac_diag.row(q) *= inv_n;
    const double norm = phi.norm();
    if (norm <= 0.0) continue;
    const Vector u = phi / norm;
    double along = 0.0;
    for (Eigen::Index i = 0; i < n_ind; ++i) {
      r = query.row(q).transpose() - inducing.row(i).transpose();
      const double ur = u.dot(r);
      const double us = u.dot(scores.row(i).transpose());
      along += kvals[i] * inv_l2 * (1.0 - (us + inv_l2 * ur) * ur);
    }
    field.jac_along[q] = along * inv_n;
  }
  return field;
}

/// Per-particle step sizes and Jacobian corrections of one normalization scheme.
/// The update is x <- x + rates .* phi and grad T = I + base_rate * A.
/// A does not depend on base_rate.
struct RateResult {
  ParticleMatrix rates;        // m x d
  std::vector<Matrix> A;       // empty unless the field carries full Jacobians
  Vector traces;               // trace(A) per particle
  ParticleMatrix rmsprop_v2;   // updated RMSProp state (RMSProp only)
  std::vector<Matrix> v2_jac;  // d(v_t^2)/dx at the pre-step positions (chain mode only)
  int stationary = 0;          // particles with |phi| below 1e-12 (l2 only)
};

inline constexpr double kStationaryVelocity = 1e-12;

/// Normalize each velocity to unit length: eps(x) = base_rate / |phi(x)| and
/// A = (I - u u^T) J / |phi| with u = phi / |phi|.
inline RateResult l2_rates(const VelocityField& field, double base_rate) {
  const Eigen::Index m = field.phi.rows();
  const Eigen::Index d = field.phi.cols();
  RateResult out;
  out.rates.setZero(m, d);
  out.traces.setZero(m);
  if (field.has_full_jacobian()) out.A.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  for (Eigen::Index q = 0; q < m; ++q) {
    const double norm = field.phi.row(q).norm();
    if (norm < kStationaryVelocity) {
      ++out.stationary;
      continue;
    }
    out.rates.row(q).setConstant(base_rate / norm);
    if (field.has_full_jacobian()) {
      const Vector u = field.phi.row(q).transpose() / norm;
      const Matrix& jac = field.phi_jac[static_cast<std::size_t>(q)];
      Matrix& a = out.A[static_cast<std::size_t>(q)];
      a = (jac - u * (u.transpose() * jac)) / norm;
      out.traces[q] = a.trace();
    } else {
      out.traces[q] = (field.jac_diag.row(q).sum() - field.jac_along[q]) / norm;
    }
  }
  return out;
}

/// RMSProp rates eps_a(x) = base_rate / (nugget + v_a) with v^2 = phi^2 on the
/// first step and v^2 = alpha v_prev^2 + (1 - alpha) phi^2 afterwards. The
/// Jacobian correction treats v_prev as constant and ignores the nugget:
/// A = diag(alpha v_prev^2 / v^3) J for step > 0 and A = 0 on the first step.
inline RateResult rmsprop_rates(const ParticleMatrix& v2_prev, int step, const VelocityField& field,
                                double base_rate, double alpha, double nugget) {
  const Eigen::Index m = field.phi.rows();
  const Eigen::Index d = field.phi.cols();
  if (step > 0 && (v2_prev.rows() != m || v2_prev.cols() != d))
    throw ConfigError("rmsprop_rates: state shape does not match the velocity field");
  RateResult out;
  const auto phi2 = field.phi.array().square();
  if (step == 0) {
    out.rmsprop_v2 = phi2.matrix();
  } else {
    out.rmsprop_v2 = (alpha * v2_prev.array() + (1.0 - alpha) * phi2).matrix();
  }
  const auto v = out.rmsprop_v2.array().sqrt();
  out.rates = (base_rate / (nugget + v)).matrix();
  out.traces.setZero(m);
  if (field.has_full_jacobian()) out.A.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  if (step == 0) return out;

  for (Eigen::Index q = 0; q < m; ++q) {
    Vector scale(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      const double va = v(q, a);
      scale[a] = va > 0.0 ? alpha * v2_prev(q, a) / (va * va * va) : 0.0;
    }
    if (field.has_full_jacobian()) {
      Matrix& a = out.A[static_cast<std::size_t>(q)];
      a = scale.asDiagonal() * field.phi_jac[static_cast<std::size_t>(q)];
      out.traces[q] = a.trace();
    } else {
      out.traces[q] = scale.dot(field.jac_diag.row(q).transpose());
    }
  }
  return out;
}

/// RMSProp rates with the exact Jacobian of x -> x + rate(x) phi(x), where
/// v_{t-1}^2 depends on the current position through `v2_jac_prev` = d(v_{t-1}^2)/dx.
/// With H = d(v_t^2)/dx = alpha G + 2 (1 - alpha) diag(phi) J:
///   A = diag(1 / (nugget + v)) J - diag(phi / (2 v (nugget + v)^2)) H.
/// On the first step v^2 = phi^2, so H = 2 diag(phi) J.
inline RateResult rmsprop_rates_chain(const ParticleMatrix& v2_prev, const std::vector<Matrix>& v2_jac_prev, int step,
                                      const VelocityField& field, double base_rate, double alpha, double nugget) {
  if (!field.has_full_jacobian()) throw ConfigError("rmsprop_rates_chain: needs full Jacobians");
  const Eigen::Index m = field.phi.rows();
  const Eigen::Index d = field.phi.cols();
  if (step > 0 && (v2_prev.rows() != m || v2_prev.cols() != d || static_cast<Eigen::Index>(v2_jac_prev.size()) != m))
    throw ConfigError("rmsprop_rates_chain: state shape does not match the velocity field");
  RateResult out;
  const auto phi2 = field.phi.array().square();
  if (step == 0) {
    out.rmsprop_v2 = phi2.matrix();
  } else {
    out.rmsprop_v2 = (alpha * v2_prev.array() + (1.0 - alpha) * phi2).matrix();
  }
  const ParticleMatrix v = out.rmsprop_v2.array().sqrt().matrix();
  out.rates = (base_rate / (nugget + v.array())).matrix();
  out.traces.setZero(m);
  out.A.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  out.v2_jac.assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));
  for (Eigen::Index q = 0; q < m; ++q) {
    const Matrix& jac = field.phi_jac[static_cast<std::size_t>(q)];
    Matrix& h = out.v2_jac[static_cast<std::size_t>(q)];
    h = 2.0 * (step == 0 ? 1.0 : 1.0 - alpha) * (field.phi.row(q).transpose().asDiagonal() * jac);
    if (step > 0) h += alpha * v2_jac_prev[static_cast<std::size_t>(q)];
    Matrix& a = out.A[static_cast<std::size_t>(q)];
    for (Eigen::Index r = 0; r < d; ++r) {
      const double va = v(q, r);
      const double inv = 1.0 / (nugget + va);
      a.row(r) = inv * jac.row(r);
      if (va > 0.0) a.row(r) -= field.phi(q, r) * inv * inv / (2.0 * va) * h.row(r);
    }
    out.traces[q] = a.trace();
  }
  return out;
}

/// log |det M| and the sign of det M via partial-pivot LU.
inline std::pair<int, double> signed_log_det(const Matrix& mat) {
  const Eigen::PartialPivLU<Matrix> lu(mat);
  const auto& packed = lu.matrixLU();
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  double log_abs = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double u = packed(i, i);
    if (u == 0.0) return {0, -std::numeric_limits<double>::infinity()};
    if (u < 0.0) sign = -sign;
    log_abs += std::log(std::abs(u));
  }
  return {sign, log_abs};
}

enum class LogDetMode { exact, trace };

/// Density update -log det(I + base_rate A) (exact) or -log(1 + base_rate tr A)
/// (trace). Returns nullopt when the (linearized) determinant is not positive.
inline std::optional<double> logdet_update(const Matrix& A, double base_rate, LogDetMode mode) {
  if (mode == LogDetMode::trace) {
    const double lin = 1.0 + base_rate * A.trace();
    if (!(lin > 0.0)) return std::nullopt;
    return -std::log(lin);
  }
  Matrix jac = base_rate * A;
  jac.diagonal().array() += 1.0;
  const auto [sign, log_abs] = signed_log_det(jac);
  if (sign <= 0) return std::nullopt;
  return -log_abs;
}

inline std::optional<double> logdet_update_from_trace(double trace, double base_rate) {
  const double lin = 1.0 + base_rate * trace;
  if (!(lin > 0.0)) return std::nullopt;
  return -std::log(lin);
}

inline constexpr double kMinBaseRate = 1e-6;

/// Largest base rate <= cap keeping 1 + rate * trace_i inside [lo, hi] for all i.
inline double adaptive_base_rate(const Vector& traces, double lo, double hi, double cap) {
  if (!(lo > 0.0 && lo < 1.0) || !(hi > 1.0) || !(cap > 0.0))
    throw ConfigError("adaptive_base_rate: need 0 < lo < 1 < hi and cap > 0");
  double rate = cap;
  for (Eigen::Index i = 0; i < traces.size(); ++i) {
    const double t = traces[i];
    if (t < 0.0) rate = std::min(rate, (lo - 1.0) / t);
    if (t > 0.0) rate = std::min(rate, (hi - 1.0) / t);
  }
  if (rate < kMinBaseRate) throw AbortError("step collapse: admissible base rate below 1e-6");
  return rate;
}

struct StepOutcome {
  Ensemble ensemble;
  StepDiagnostics diagnostics;
};

/// Move every particle along the velocity field built from the inducing
/// particles' scores and update the tracked log-densities. The input ensemble
/// is left untouched; an AbortError means the step was rejected.
inline StepOutcome transport_step(const Ensemble& ens, const InducingEvaluation& eval, const KernelConfig& kernel_cfg,
                                  const TransportConfig& cfg) {
  if (eval.scores.rows() != ens.n_inducing) throw ConfigError("transport_step: inducing evaluation does not match ensemble");
  StepDiagnostics diag;
  const ParticleMatrix inducing = ens.inducing();
  diag.bandwidth = select_bandwidth(kernel_cfg, inducing);
  diag.exact_determinant = cfg.exact_determinant(ens.dim());
  const bool chain = cfg.normalization == Normalization::rmsprop && cfg.rmsprop_jacobian == RmspropJacobian::chain &&
                     diag.exact_determinant;
  diag.chain_jacobian = chain;

  const VelocityField field = stein_velocity(inducing, eval.scores, diag.bandwidth, ens.positions, diag.exact_determinant);
  if (!field.phi.allFinite()) throw AbortError("non-finite velocity field");

  const Vector norms = field.phi.rowwise().norm();
  diag.velocity_norm_min = norms.minCoeff();
  diag.velocity_norm_max = norms.maxCoeff();
  diag.velocity_norm_mean = norms.mean();

  RateResult unit = cfg.normalization == Normalization::l2 ? l2_rates(field, 1.0)
                    : chain ? rmsprop_rates_chain(ens.rmsprop_v2, ens.rmsprop_v2_jac, ens.step, field, 1.0, cfg.alpha,
                                                  cfg.nugget)
                            : rmsprop_rates(ens.rmsprop_v2, ens.step, field, 1.0, cfg.alpha, cfg.nugget);
  diag.stationary_particles = unit.stationary;
  if (!unit.traces.allFinite()) throw AbortError("non-finite Jacobian correction");

  double base_rate = cfg.rate_policy == RatePolicy::adaptive
                         ? adaptive_base_rate(unit.traces, cfg.corridor_lo, cfg.corridor_hi, cfg.base_rate)
                         : cfg.base_rate;

  const int m = ens.size();
  Vector delta(m);
  for (;;) {
    bool accepted = true;
    diag.min_det = std::numeric_limits<double>::infinity();
    diag.max_det = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < m && accepted; ++q) {
      const auto d = diag.exact_determinant
                         ? logdet_update(unit.A[static_cast<std::size_t>(q)], base_rate, LogDetMode::exact)
                         : logdet_update_from_trace(unit.traces[q], base_rate);
      if (!d) {
        accepted = false;
        break;
      }
      delta[q] = *d;
      const double det = std::exp(-*d);
      diag.min_det = std::min(diag.min_det, det);
      diag.max_det = std::max(diag.max_det, det);
    }
    if (accepted) break;
    ++diag.rejections;
    base_rate *= 0.5;
    if (base_rate < kMinBaseRate) throw AbortError("transform not invertible: base rate collapsed below 1e-6");
  }
  diag.base_rate_used = base_rate;

  StepOutcome out{ens, diag};
  Ensemble& next = out.ensemble;
  next.positions.array() += base_rate * unit.rates.array() * field.phi.array();
  next.log_q += delta;
  if (cfg.normalization == Normalization::rmsprop) next.rmsprop_v2 = std::move(unit.rmsprop_v2);
  if (chain) {
    // d(v^2)/dx at the new positions: H (I + base_rate A)^{-1}
    next.rmsprop_v2_jac.resize(static_cast<std::size_t>(m));
    for (int q = 0; q < m; ++q) {
      Matrix grad_t = base_rate * unit.A[static_cast<std::size_t>(q)];
      grad_t.diagonal().array() += 1.0;
      next.rmsprop_v2_jac[static_cast<std::size_t>(q)] =
          grad_t.transpose().partialPivLu().solve(unit.v2_jac[static_cast<std::size_t>(q)].transpose()).transpose();
    }
  }
  next.step += 1;
  if (!next.positions.allFinite() || !next.log_q.allFinite())
    throw AbortError("non-finite particle position or log-density after transport");
  return out;
}

inline StepOutcome transport_step(const Ensemble& ens, const LimitStateProblem& problem, const SmootherParams& smoother,
                                  const KernelConfig& kernel_cfg, const TransportConfig& cfg) {
  return transport_step(ens, evaluate_inducing(ens, problem, smoother), kernel_cfg, cfg);
}

inline std::string to_string(Normalization n) { return n == Normalization::l2 ? "l2" : "rmsprop"; }
inline std::string to_string(RatePolicy p) { return p == RatePolicy::constant ? "constant" : "adaptive"; }
inline std::string to_string(RmspropJacobian j) { return j == RmspropJacobian::chain ? "chain" : "frozen"; }
inline std::string to_string(DetMode m) {
  switch (m) {
    case DetMode::exact: return "exact";
    case DetMode::trace: return "trace";
    default: return "auto";
  }
}

}  // namespace svre
