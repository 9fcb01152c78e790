#include "svre/bench.hpp"
#include "svre/benchmarks.hpp"
#include "svre/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace svre;

namespace {

RunRecord record(double p_hat, double delta_hat = 0.1, bool converged = true) {
  RunRecord r;
  r.p_hat = p_hat;
  r.delta_hat = delta_hat;
  r.converged = converged;
  r.gradient_calls = 40;
  r.model_calls = 1040;
  return r;
}

}  // namespace

TEST(Rrmse, HandExamples) {
  const double p = 1e-4;
  const BenchmarkResult a = rrmse({record(2 * p), record(0.0)}, p);
  EXPECT_NEAR(a.rrmse, 1.0, 1e-12);
  EXPECT_NEAR(a.rel_bias, 0.0, 1e-12);
  EXPECT_NEAR(a.rel_std, 1.0, 1e-12);
  const BenchmarkResult b = rrmse({record(1.5 * p), record(1.5 * p)}, p);
  EXPECT_NEAR(b.rrmse, 0.5, 1e-12);
  EXPECT_NEAR(b.rel_bias, 0.5, 1e-12);
  EXPECT_EQ(b.rel_std, 0.0);
  EXPECT_EQ(rrmse({record(p), record(p), record(p)}, p).rrmse, 0.0);
}

TEST(Rrmse, Exclusion) {
  const double p = 0.01;
  const std::vector<RunRecord> runs{record(p), record(100 * p, 0.6), record(50 * p, 0.1, false),
                                    record(p, INFINITY)};
  const BenchmarkResult r = rrmse(runs, p, 0.5);
  EXPECT_EQ(r.used_runs, 1);
  EXPECT_EQ(r.excluded_runs, 3);
  EXPECT_EQ(r.rrmse, 0.0);
  EXPECT_DOUBLE_EQ(r.mean_gradient_calls, 40.0);
  EXPECT_DOUBLE_EQ(r.mean_model_calls, 1040.0);
  // a looser threshold keeps the noisy run
  EXPECT_EQ(rrmse(runs, p, 0.7).used_runs, 2);
}

TEST(Rrmse, Degenerate) {
  EXPECT_THROW(rrmse({record(0.1, 0.9)}, 0.1), ConfigError);
  EXPECT_THROW(rrmse({record(0.1)}, 0.0), ConfigError);
}

TEST(CrudeMc, LinearBetaTwo) {
  const auto p = linear_lsf(5, 2.0);
  const McEstimate mc = crude_mc(p, 1'000'000, 7);
  const double ref = 0.022750131948179195;
  EXPECT_NEAR(mc.p_hat, ref, 4.0 * ref * mc.cov);
  EXPECT_NEAR(mc.cov, std::sqrt((1 - ref) / (1e6 * ref)), 1e-4);
  EXPECT_EQ(mc.n_samples, 1'000'000u);
  EXPECT_EQ(static_cast<double>(mc.hits) / 1e6, mc.p_hat);
}

TEST(CrudeMc, ThreadCountInvariant) {
  const auto p = quadratic_lsf(3, 1.5, 2.0);
  const McEstimate one = crude_mc(p, 300'000, 11, 1);
  const McEstimate four = crude_mc(p, 300'000, 11, 4);
  EXPECT_EQ(one.hits, four.hits);
  EXPECT_NE(crude_mc(p, 300'000, 12, 1).hits, one.hits);
}

TEST(CrudeMc, NoHits) {
  const McEstimate mc = crude_mc(linear_lsf(2, 10.0), 1000, 1);
  EXPECT_EQ(mc.p_hat, 0.0);
  EXPECT_TRUE(std::isinf(mc.cov));
  EXPECT_THROW(crude_mc(linear_lsf(2, 1.0), 0, 1), ConfigError);
}

TEST(CrudeMc, QuadraticAgreesWithQuadrature) {
  const auto p = quadratic_lsf(2, 2.0, 1.0);
  const McEstimate mc = crude_mc(p, 1'000'000, 3);
  const double ref = *p.reference_probability();
  EXPECT_NEAR(mc.p_hat, ref, 4.0 * ref * mc.cov);
}

TEST(DesignPoint, Linear) {
  const auto p = linear_lsf(4, 3.0);
  const Vector x = design_point(p.function(), Vector::Zero(4));
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(x[j], 1.5, 1e-10);
}

TEST(DesignPoint, FourBranchPointsOnLimitState) {
  for (double gamma : {0.0, 2.0}) {
    const auto p = fourbranch_lsf(gamma);
    for (const Vector& c : fourbranch_design_points(gamma)) EXPECT_NEAR(p.eval(c), 0.0, 1e-12);
  }
}

TEST(MixtureIs, FourBranchAgainstQuadrature) {
  const auto p = fourbranch_lsf(2.0);
  const auto centers = fourbranch_design_points(2.0);
  const McEstimate is = mixture_is(p, centers, std::vector<double>(4, 1.0), 200'000, 5);
  const double ref = 1.2164099105916803e-06;
  EXPECT_NEAR(is.p_hat, ref, 4.0 * ref * is.cov);
  EXPECT_LT(is.cov, 0.02);
}

TEST(MixtureIs, LinearSingleCenter) {
  const auto p = linear_lsf(10, 4.0);
  const Vector c = design_point(p.function(), Vector::Zero(10));
  const McEstimate is = mixture_is(p, {c}, {1.0}, 100'000, 6);
  const double ref = 3.1671241833119863e-05;
  EXPECT_NEAR(is.p_hat, ref, 4.0 * ref * is.cov);
  EXPECT_THROW(mixture_is(p, {}, {}, 10, 1), ConfigError);
}

TEST(Benchmark, SeedsDistinctAndThreadInvariant) {
  const auto p = linear_lsf(3, 2.5);
  SvreConfig cfg;
  cfg.n = 200;
  cfg.n_grad = 10;
  cfg.seed = 99;
  cfg.transport.normalization = Normalization::l2;
  const auto a = run_benchmark(p, cfg, 8, 1);
  const auto b = run_benchmark(p, cfg, 8, 3);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].p_hat, b[i].p_hat);
    EXPECT_EQ(a[i].model_calls, b[i].model_calls);
    EXPECT_EQ(a[i].gradient_calls, static_cast<std::uint64_t>(cfg.n_grad * a[i].iterations));
    seeds.insert(a[i].seed);
  }
  EXPECT_EQ(seeds.size(), 8u);
  EXPECT_THROW(run_benchmark(p, cfg, 0), ConfigError);
}
