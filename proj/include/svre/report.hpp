#pragma once

#include "svre/config.hpp"
#include "svre/estimator.hpp"
#include "svre/oracle.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

namespace svre {

inline constexpr const char* kSchemaVersion = "1.0.0";

namespace detail {

// Non-finite numbers become null; JSON has no infinity.
inline nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

// Shortest decimal form that round-trips, for CSV cells.
inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const SvreConfig& c) {
  return {
      {"svre", {{"n", c.n}, {"n_grad", c.n_grad}, {"delta_thresh", c.delta_thresh}, {"t_max", c.t_max},
                {"seed", c.seed}, {"init", to_string(c.init)}, {"scramble", c.scramble}}},
      {"smoother", {{"P", c.smoother.P}, {"sigma", c.smoother.sigma}, {"mu", c.smoother.mu}}},
      {"kernel", {{"strategy", to_string(c.kernel.strategy)}, {"length", c.kernel.fixed_length}}},
      {"transport",
       {{"normalization", to_string(c.transport.normalization)},
        {"base_rate", c.transport.base_rate},
        {"rate_policy", to_string(c.transport.rate_policy)},
        {"det_mode", to_string(c.transport.det_mode)},
        {"corridor", {c.transport.corridor_lo, c.transport.corridor_hi}},
        {"alpha", c.transport.alpha},
        {"nugget", c.transport.nugget},
        {"rmsprop_jacobian", to_string(c.transport.rmsprop_jacobian)}}},
  };
}

inline nlohmann::json problem_json(const ProblemSpec& spec, int dim) {
  nlohmann::json p = spec.params;
  p["id"] = spec.id;
  p["dim"] = dim;
  return p;
}

inline nlohmann::json to_json(const StepDiagnostics& s) {
  return {{"base_rate", s.base_rate_used},
          {"bandwidth", s.bandwidth},
          {"min_det", s.min_det},
          {"max_det", s.max_det},
          {"velocity_norm_mean", s.velocity_norm_mean},
          {"stationary_particles", s.stationary_particles},
          {"rejections", s.rejections},
          {"chain_jacobian", s.chain_jacobian},
          {"exact_determinant", s.exact_determinant}};
}

inline nlohmann::json report_json(const EstimateReport& r, const ProblemSpec& spec, int dim, const SvreConfig& cfg) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& s : r.history) history.push_back(to_json(s));
  return {{"schema_version", kSchemaVersion},
          {"kind", "estimate"},
          {"problem", problem_json(spec, dim)},
          {"config", to_json(cfg)},
          {"p_hat", r.p_hat},
          {"delta_hat", detail::number_or_null(r.delta_hat)},
          {"iterations", r.iterations},
          {"steps", r.steps},
          {"model_calls", r.model_calls},
          {"gradient_calls", r.gradient_calls},
          {"termination", to_string(r.termination)},
          {"final_delta_w", detail::number_or_null(r.final_delta_w)},
          {"message", r.message},
          {"warnings", r.warnings},
          {"history", history}};
}

inline nlohmann::json bench_json(const BenchmarkResult& b, const ProblemSpec& spec, int dim, const SvreConfig& cfg,
                                 const std::string& p_ref_source, double exclusion_threshold, unsigned threads) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "benchmark"},
          {"problem", problem_json(spec, dim)},
          {"config", to_json(cfg)},
          {"runs", b.estimates.size()},
          {"threads", threads},
          {"p_ref", b.p_ref},
          {"p_ref_source", p_ref_source},
          {"exclusion_threshold", exclusion_threshold},
          {"rrmse", b.rrmse},
          {"rel_bias", b.rel_bias},
          {"rel_std", b.rel_std},
          {"mean_p_hat", b.mean_p_hat},
          {"used_runs", b.used_runs},
          {"excluded_runs", b.excluded_runs},
          {"mean_gradient_calls", b.mean_gradient_calls},
          {"mean_model_calls", b.mean_model_calls}};
}

inline nlohmann::json oracle_json(const ProblemSpec& spec, int dim, double p_ref, const std::string& method,
                                  std::uint64_t n_samples, double cov) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "oracle"},
          {"problem", problem_json(spec, dim)},
          {"p_ref", p_ref},
          {"method", method},
          {"n_samples", n_samples},
          {"cov", detail::number_or_null(cov)}};
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "run,seed,p_hat,delta_hat,iterations,gradient_calls,model_calls,converged\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    os << i << ',' << r.seed << ',' << detail::fmt_double(r.p_hat) << ',' << detail::fmt_double(r.delta_hat) << ','
       << r.iterations << ',' << r.gradient_calls << ',' << r.model_calls << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

/// Final estimation particles: x_1..x_d then the importance weight.
inline void write_samples_csv(std::ostream& os, const EstimateReport& r) {
  const Eigen::Index d = r.final_positions.cols();
  for (Eigen::Index j = 0; j < d; ++j) os << 'x' << j + 1 << ',';
  os << "weight\n";
  for (Eigen::Index i = 0; i < r.final_positions.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) os << detail::fmt_double(r.final_positions(i, j)) << ',';
    os << (i < r.weights.size() ? detail::fmt_double(r.weights[i]) : "") << '\n';
  }
}

}  // namespace svre
