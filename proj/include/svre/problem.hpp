#pragma once

#include "svre/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace svre {

/// A limit-state function g on standard-normal space; failure is {g <= 0}.
/// Implementations must be pure and reentrant.
class LimitStateFunction {
 public:
  virtual ~LimitStateFunction() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual double value(const VectorRef& x) const = 0;
  virtual Vector gradient(const VectorRef& x) const = 0;

  /// Value and gradient together; override when they share work.
  virtual std::pair<double, Vector> value_and_gradient(const VectorRef& x) const {
    return {value(x), gradient(x)};
  }

  /// Exact or semi-analytic failure probability, when one is known.
  virtual std::optional<double> reference_probability() const { return std::nullopt; }
};

struct EvalRecord {
  Vector x;
  double g_value = 0.0;
  std::optional<Vector> gradient;
};

/// Counting front end over an immutable limit-state function.
///
/// Every eval() adds one model call, every grad() one gradient call. The
/// counters are atomic so concurrent evaluations are counted exactly. Copies
/// share the function but start from zero counts.
class LimitStateProblem {
 public:
  explicit LimitStateProblem(std::shared_ptr<const LimitStateFunction> fn) : fn_(std::move(fn)) {
    if (!fn_) throw ConfigError("LimitStateProblem: null limit-state function");
  }
  LimitStateProblem(const LimitStateProblem& other) : fn_(other.fn_) {}
  LimitStateProblem& operator=(const LimitStateProblem& other) {
    fn_ = other.fn_;
    reset_counters();
    return *this;
  }

  int dim() const { return fn_->dim(); }
  std::string name() const { return fn_->name(); }
  std::optional<double> reference_probability() const { return fn_->reference_probability(); }
  const LimitStateFunction& function() const { return *fn_; }

  double eval(const VectorRef& x) const {
    model_calls_.fetch_add(1, std::memory_order_relaxed);
    return fn_->value(x);
  }

  Vector grad(const VectorRef& x) const {
    gradient_calls_.fetch_add(1, std::memory_order_relaxed);
    return fn_->gradient(x);
  }

  /// One model call plus one gradient call.
  EvalRecord eval_with_gradient(const VectorRef& x) const {
    model_calls_.fetch_add(1, std::memory_order_relaxed);
    gradient_calls_.fetch_add(1, std::memory_order_relaxed);
    auto [g, dg] = fn_->value_and_gradient(x);
    return EvalRecord{Vector(x), g, std::move(dg)};
  }

  std::uint64_t model_calls() const { return model_calls_.load(); }
  std::uint64_t gradient_calls() const { return gradient_calls_.load(); }
  void reset_counters() {
    model_calls_ = 0;
    gradient_calls_ = 0;
  }

 private:
  std::shared_ptr<const LimitStateFunction> fn_;
  mutable std::atomic<std::uint64_t> model_calls_{0};
  mutable std::atomic<std::uint64_t> gradient_calls_{0};
};

/// Max over components of |central difference - analytic| / max(1, |analytic|).
/// Returns +inf when any evaluation is non-finite. Does not touch call counters.
inline double gradient_check(const LimitStateFunction& fn, const VectorRef& x, double h) {
  if (!(h > 0.0)) throw ConfigError("gradient_check: step h must be positive");
  const Vector analytic = fn.gradient(x);
  if (!analytic.allFinite()) return std::numeric_limits<double>::infinity();
  Vector probe = x;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = fn.value(probe);
    probe[j] = x[j] - h;
    const double down = fn.value(probe);
    probe[j] = x[j];
    if (!std::isfinite(up) || !std::isfinite(down)) return std::numeric_limits<double>::infinity();
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - analytic[j]) / std::max(1.0, std::abs(analytic[j])));
  }
  return worst;
}

inline double gradient_check(const LimitStateProblem& problem, const VectorRef& x, double h) {
  return gradient_check(problem.function(), x, h);
}

}  // namespace svre
