#pragma once

#include "svre/estimator.hpp"
#include "svre/oracle.hpp"
#include "svre/problem.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace svre {

inline std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run_index) {
  return mix_seed(master_seed, run_index);
}

inline RunRecord to_record(const EstimateReport& r, std::uint64_t seed) {
  RunRecord rec;
  rec.seed = seed;
  rec.p_hat = r.p_hat;
  rec.delta_hat = r.delta_hat;
  rec.iterations = r.iterations;
  rec.gradient_calls = r.gradient_calls;
  rec.model_calls = r.model_calls;
  rec.converged = r.termination == Termination::converged;
  return rec;
}

/// `runs` independent SVRE runs with seeds derived from (cfg.seed, index).
/// Each run gets its own call counters. Output order follows the run index,
/// so the result is the same for any thread count.
inline std::vector<RunRecord> run_benchmark(const LimitStateProblem& problem, const SvreConfig& cfg, int runs,
                                            unsigned threads = 1) {
  if (runs < 1) throw ConfigError("bench: runs must be >= 1");
  cfg.validate();
  std::vector<RunRecord> records(static_cast<std::size_t>(runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < runs; i = next++) {
      SvreConfig local = cfg;
      local.seed = run_seed(cfg.seed, static_cast<std::uint64_t>(i));
      const LimitStateProblem fresh(problem);
      records[static_cast<std::size_t>(i)] = to_record(run_svre(fresh, local), local.seed);
    }
  };
  threads = std::clamp(threads, 1u, static_cast<unsigned>(runs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return records;
}

}  // namespace svre
