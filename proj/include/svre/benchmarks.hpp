#pragma once

#include "svre/problem.hpp"
#include "svre/references.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace svre {

/// g(x) = beta - sum(x)/sqrt(d); p_F = Phi(-beta).
class LinearLsf final : public LimitStateFunction {
 public:
  LinearLsf(int dim, double beta) : dim_(dim), beta_(beta), scale_(1.0 / std::sqrt(double(dim))) {
    if (dim < 1) throw ConfigError("linear: d must be >= 1");
    if (!std::isfinite(beta)) throw ConfigError("linear: beta must be finite");
  }
  int dim() const override { return dim_; }
  std::string name() const override { return "linear"; }
  double value(const VectorRef& x) const override { return beta_ - scale_ * x.sum(); }
  Vector gradient(const VectorRef&) const override { return Vector::Constant(dim_, -scale_); }
  std::optional<double> reference_probability() const override { return normal::cdf(-beta_); }
  double beta() const { return beta_; }

 private:
  int dim_;
  double beta_;
  double scale_;
};

/// g(x) = beta + (kappa/4)(x1-x2)^2 - sum(x)/sqrt(d).
class QuadraticLsf final : public LimitStateFunction {
 public:
  QuadraticLsf(int dim, double beta, double kappa)
      : dim_(dim), beta_(beta), kappa_(kappa), scale_(1.0 / std::sqrt(double(dim))) {
    if (dim < 2) throw ConfigError("quadratic: d must be >= 2");
    if (!std::isfinite(beta) || !std::isfinite(kappa))
      throw ConfigError("quadratic: beta and kappa must be finite");
  }
  int dim() const override { return dim_; }
  std::string name() const override { return "quadratic"; }
  double value(const VectorRef& x) const override {
    const double diff = x[0] - x[1];
    return beta_ + 0.25 * kappa_ * diff * diff - scale_ * x.sum();
  }
  Vector gradient(const VectorRef& x) const override {
    Vector g = Vector::Constant(dim_, -scale_);
    const double bend = 0.5 * kappa_ * (x[0] - x[1]);
    g[0] += bend;
    g[1] -= bend;
    return g;
  }
  std::optional<double> reference_probability() const override {
    if (kappa_ < 0.0) return std::nullopt;
    return quadratic_reference(beta_, kappa_);
  }

 private:
  int dim_;
  double beta_;
  double kappa_;
  double scale_;
};

/// Series system of four branches in two dimensions:
///   g(x) = min(g1, g2, g3, g4) + gamma
/// Gradient of the minimizing branch; ties go to the lowest branch index.
class FourBranchLsf final : public LimitStateFunction {
 public:
  explicit FourBranchLsf(double gamma) : gamma_(gamma) {
    if (!std::isfinite(gamma)) throw ConfigError("fourbranch: gamma must be finite");
  }
  int dim() const override { return 2; }
  std::string name() const override { return "fourbranch"; }

  static std::array<double, 4> branches(const VectorRef& x) {
    constexpr double r2 = std::numbers::sqrt2;
    const double diff = x[0] - x[1];
    const double sum = (x[0] + x[1]) / r2;
    return {0.1 * diff * diff - sum + 3.0, 0.1 * diff * diff + sum + 3.0, diff + 7.0 / r2,
            -diff + 7.0 / r2};
  }

  static int active_branch(const std::array<double, 4>& b) {
    int best = 0;
    for (int i = 1; i < 4; ++i)
      if (b[i] < b[best]) best = i;
    return best;
  }

  double value(const VectorRef& x) const override {
    check_dim(x);
    const auto b = branches(x);
    return b[active_branch(b)] + gamma_;
  }

  Vector gradient(const VectorRef& x) const override {
    check_dim(x);
    constexpr double inv_r2 = 1.0 / std::numbers::sqrt2;
    const double bend = 0.2 * (x[0] - x[1]);
    Vector g(2);
    switch (active_branch(branches(x))) {
      case 0: g << bend - inv_r2, -bend - inv_r2; break;
      case 1: g << bend + inv_r2, -bend + inv_r2; break;
      case 2: g << 1.0, -1.0; break;
      default: g << -1.0, 1.0; break;
    }
    return g;
  }

  std::optional<double> reference_probability() const override { return fourbranch_reference(gamma_); }

 private:
  static void check_dim(const VectorRef& x) {
    if (x.size() != 2) throw ConfigError("fourbranch: input must have dimension 2");
  }
  double gamma_;
};

inline LimitStateProblem linear_lsf(int dim, double beta) {
  return LimitStateProblem(std::make_shared<LinearLsf>(dim, beta));
}

inline LimitStateProblem quadratic_lsf(int dim, double beta, double kappa) {
  return LimitStateProblem(std::make_shared<QuadraticLsf>(dim, beta, kappa));
}

inline LimitStateProblem fourbranch_lsf(double gamma, int dim = 2) {
  if (dim != 2) throw ConfigError("fourbranch: d must be 2");
  return LimitStateProblem(std::make_shared<FourBranchLsf>(gamma));
}

}  // namespace svre
