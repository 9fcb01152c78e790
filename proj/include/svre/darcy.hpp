#pragma once

#include "svre/common.hpp"
#include "svre/normal.hpp"
#include "svre/problem.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace svre::darcy {

/// Pressure head in a 1-D aquifer on [0, 1]:
///   (kappa u')' = -s J,  kappa(0) u'(0) = -F,  u(1) = 1
/// with s = source_sign, lognormal kappa from a Karhunen-Loeve expansion and
/// a Gaussian flux F. Inputs are x = (x_F, xi_1, ..., xi_{d-1}) in standard-normal space.
struct DarcyConfig {
  int d = 10;
  int grid_m = 513;
  double mu_lnk = 1.0;
  double var_lnk = 0.3;
  double corr_len = 0.1;
  double mu_F = 2.0;
  double var_F = 0.5;
  double p_thresh = 2.7;
  /// +1: J is a source (flux-form reading); -1: J acts as a sink.
  double source_sign = 1.0;

  void validate() const {
    if (d < 2) throw ConfigError("darcy.d must be >= 2");
    if (grid_m < 65) throw ConfigError("darcy.grid_m must be >= 65");
    if (d - 1 > grid_m) throw ConfigError("darcy.d - 1 must not exceed darcy.grid_m");
    if (!(corr_len > 0.0)) throw ConfigError("darcy.corr_len must be positive");
    if (!(var_lnk >= 0.0) || !(var_F >= 0.0)) throw ConfigError("darcy variances must be non-negative");
    if (source_sign != 1.0 && source_sign != -1.0) throw ConfigError("darcy.source_sign must be +1 or -1");
  }
};

/// Leading eigenpairs of the exponential correlation kernel on a uniform grid.
struct KLBasis {
  Vector nodes;
  Vector weights;       // trapezoid weights
  Vector eigenvalues;   // descending
  Matrix eigenfunctions;  // terms x grid_m, unit norm in the trapezoid L2 inner product
  Vector all_eigenvalues;

  int terms() const { return static_cast<int>(eigenvalues.size()); }
  int grid_size() const { return static_cast<int>(nodes.size()); }
};

inline Vector uniform_grid(int grid_m) { return Vector::LinSpaced(grid_m, 0.0, 1.0); }

inline Vector trapezoid_weights(int grid_m) {
  const double h = 1.0 / (grid_m - 1);
  Vector w = Vector::Constant(grid_m, h);
  w[0] = w[grid_m - 1] = 0.5 * h;
  return w;
}

/// Nystrom discretization: eigendecompose W^{1/2} C W^{1/2} with C the kernel
/// matrix and W the trapezoid weights, then map eigenvectors back through
/// W^{-1/2}. Eigenfunctions are signed so that phi_i(0) >= 0.
inline KLBasis kl_decompose(double corr_len, int grid_m, int terms) {
  if (terms < 0 || terms > grid_m) throw ConfigError("kl_decompose: terms must lie in [0, grid_m]");
  if (!(corr_len > 0.0)) throw ConfigError("kl_decompose: corr_len must be positive");
  KLBasis basis;
  basis.nodes = uniform_grid(grid_m);
  basis.weights = trapezoid_weights(grid_m);
  const Vector sw = basis.weights.cwiseSqrt();
  Matrix scaled(grid_m, grid_m);
  for (int i = 0; i < grid_m; ++i)
    for (int j = 0; j < grid_m; ++j)
      scaled(i, j) = sw[i] * std::exp(-std::abs(basis.nodes[i] - basis.nodes[j]) / corr_len) * sw[j];
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(scaled);
  if (solver.info() != Eigen::Success) throw AbortError("kl_decompose: eigensolver failed");
  // Eigen sorts ascending.
  basis.all_eigenvalues = solver.eigenvalues().reverse();
  basis.eigenvalues = basis.all_eigenvalues.head(terms);
  basis.eigenfunctions.resize(terms, grid_m);
  for (int t = 0; t < terms; ++t) {
    if (!(basis.eigenvalues[t] > 0.0)) throw AbortError("kl_decompose: non-positive eigenvalue among leading terms");
    Vector f = solver.eigenvectors().col(grid_m - 1 - t).cwiseQuotient(sw);
    f /= std::sqrt(basis.weights.dot(f.cwiseProduct(f)));
    if (f[0] < 0.0) f = -f;
    basis.eigenfunctions.row(t) = f.transpose();
  }
  return basis;
}

/// kappa(y_j) = exp(mu + sigma sum_i sqrt(lambda_i) phi_i(y_j) xi_i) on the grid.
inline Vector sample_field(const KLBasis& basis, const VectorRef& xi, double mu_lnk = 1.0,
                           double sigma_lnk = std::sqrt(0.3)) {
  if (xi.size() != basis.terms()) throw ConfigError("sample_field: xi length must equal the number of KL terms");
  Vector log_k = Vector::Constant(basis.grid_size(), mu_lnk);
  for (int t = 0; t < basis.terms(); ++t)
    log_k += (sigma_lnk * std::sqrt(basis.eigenvalues[t]) * xi[t]) * basis.eigenfunctions.row(t).transpose();
  return log_k.array().exp();
}

inline constexpr std::array<double, 4> kPlumeCenters{0.2, 0.4, 0.6, 0.8};
inline constexpr double kPlumeWidth = 0.05;
inline constexpr double kPlumeScale = 0.8;

/// J(y) = 0.8 sum_i N(y | 0.2 i, 0.05^2).
inline double source_term(double y) {
  double sum = 0.0;
  for (double c : kPlumeCenters) sum += normal::pdf((y - c) / kPlumeWidth) / kPlumeWidth;
  return kPlumeScale * sum;
}

/// Q(y) = int_0^y J(t) dt in closed form.
inline double cumulative_source(double y) {
  double sum = 0.0;
  for (double c : kPlumeCenters) sum += normal::cdf((y - c) / kPlumeWidth) - normal::cdf(-c / kPlumeWidth);
  return kPlumeScale * sum;
}

/// u(y_j) = 1 + int_{y_j}^1 (F + s Q(t)) / kappa(t) dt by the trapezoid rule on
/// the uniform grid.
inline Vector solve_pressure(const Vector& kappa, double flux, double source_sign = 1.0) {
  const Eigen::Index m = kappa.size();
  if (m < 2) throw ConfigError("solve_pressure: need at least two grid nodes");
  if (!(kappa.minCoeff() > 0.0)) throw ConfigError("solve_pressure: diffusivity must be positive");
  const double h = 1.0 / static_cast<double>(m - 1);
  Vector u(m);
  u[m - 1] = 1.0;
  double prev = (flux + source_sign * cumulative_source(1.0)) / kappa[m - 1];
  for (Eigen::Index j = m - 2; j >= 0; --j) {
    const double y = static_cast<double>(j) * h;
    const double cur = (flux + source_sign * cumulative_source(y)) / kappa[j];
    u[j] = u[j + 1] + 0.5 * h * (cur + prev);
    prev = cur;
  }
  return u;
}

/// g(x) = p_thresh - max_j u(y_j; x). Gradient at the argmax node (lowest index on ties).
class DarcyLsf final : public LimitStateFunction {
 public:
  explicit DarcyLsf(const DarcyConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    basis_ = std::make_shared<const KLBasis>(kl_decompose(cfg_.corr_len, cfg_.grid_m, cfg_.d - 1));
    const int m = cfg_.grid_m;
    sigma_lnk_ = std::sqrt(cfg_.var_lnk);
    sigma_F_ = std::sqrt(cfg_.var_F);
    source_.resize(m);
    for (int j = 0; j < m; ++j) source_[j] = cfg_.source_sign * cumulative_source(basis_->nodes[j]);
    modes_ = basis_->eigenfunctions;
    for (int t = 0; t < basis_->terms(); ++t) modes_.row(t) *= sigma_lnk_ * std::sqrt(basis_->eigenvalues[t]);
  }

  int dim() const override { return cfg_.d; }
  std::string name() const override { return "darcy"; }
  const KLBasis& basis() const { return *basis_; }
  const DarcyConfig& config() const { return cfg_; }

  /// Pressure head on the grid for input x.
  Vector pressure(const VectorRef& x) const {
    check(x);
    return solve_pressure(diffusivity(x), flux(x), cfg_.source_sign);
  }

  Vector diffusivity(const VectorRef& x) const {
    return (Vector::Constant(cfg_.grid_m, cfg_.mu_lnk) + modes_.transpose() * x.tail(cfg_.d - 1)).array().exp();
  }

  double flux(const VectorRef& x) const { return cfg_.mu_F + sigma_F_ * x[0]; }

  double value(const VectorRef& x) const override {
    check(x);
    const Vector inv_k = (-(Vector::Constant(cfg_.grid_m, cfg_.mu_lnk) + modes_.transpose() * x.tail(cfg_.d - 1)))
                             .array()
                             .exp();
    const double flux_value = flux(x);
    const int m = cfg_.grid_m;
    const double half_h = 0.5 / (m - 1);
    double tail = 0.0;
    double best = 0.0;  // u(1) - 1
    double prev = (flux_value + source_[m - 1]) * inv_k[m - 1];
    for (int j = m - 2; j >= 0; --j) {
      const double cur = (flux_value + source_[j]) * inv_k[j];
      tail += half_h * (cur + prev);
      prev = cur;
      if (tail >= best) best = tail;
    }
    return cfg_.p_thresh - (1.0 + best);
  }

  Vector gradient(const VectorRef& x) const override { return value_and_gradient(x).second; }

  std::pair<double, Vector> value_and_gradient(const VectorRef& x) const override {
    check(x);
    const Vector u = pressure(x);
    const int m = cfg_.grid_m;
    const double h = 1.0 / (m - 1);
    Eigen::Index star = 0;
    u.maxCoeff(&star);  // first maximal index
    const Vector inv_k = diffusivity(x).cwiseInverse();
    const double flux_value = flux(x);
    Vector grad = Vector::Zero(cfg_.d);
    if (star < m - 1) {
      // trapezoid weights of int_{y*}^1
      Vector w = Vector::Zero(m);
      w.segment(star, m - star).setConstant(h);
      w[star] = w[m - 1] = 0.5 * h;
      const Vector integrand = (flux_value + source_.array()).matrix().cwiseProduct(inv_k);
      const double du_dF = w.dot(inv_k);
      grad[0] = -du_dF * sigma_F_;
      // du/dxi_t = -int (F + sQ)/kappa * dlogkappa/dxi_t
      grad.tail(cfg_.d - 1) = modes_ * w.cwiseProduct(integrand);
    }
    return {cfg_.p_thresh - u[star], grad};
  }

 private:
  void check(const VectorRef& x) const {
    if (x.size() != cfg_.d) throw ConfigError("darcy: input dimension mismatch");
  }

  DarcyConfig cfg_;
  std::shared_ptr<const KLBasis> basis_;
  Matrix modes_;  // sigma sqrt(lambda_t) phi_t(y_j), terms x grid_m
  Vector source_;
  double sigma_lnk_ = 0.0;
  double sigma_F_ = 0.0;
};

inline LimitStateProblem darcy_lsf(const DarcyConfig& cfg) {
  return LimitStateProblem(std::make_shared<DarcyLsf>(cfg));
}

}  // namespace svre::darcy
