// svre: command-line front end for the Stein variational rare event estimator.

#include "svre/bench.hpp"
#include "svre/config.hpp"
#include "svre/oracle.hpp"
#include "svre/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

namespace {

enum Exit : int { kConverged = 0, kConfigError = 1, kAborted = 2, kMaxIterations = 3, kGradcheckFailed = 4 };

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<double> p_ref;
  std::optional<unsigned> threads;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw svre::ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

svre::RunConfig load(const Options& opt) {
  if (opt.config_path.empty()) throw svre::ConfigError("--config is required");
  svre::RunConfig cfg = svre::parse_run_config_text(read_file(opt.config_path));
  // command line beats the file
  if (opt.seed) cfg.svre.seed = *opt.seed;
  if (opt.runs) {
    if (*opt.runs < 2) throw svre::ConfigError("--runs must be >= 2");
    cfg.runs = *opt.runs;
  }
  if (opt.p_ref) {
    if (!(*opt.p_ref > 0.0)) throw svre::ConfigError("--p-ref must be positive");
    cfg.p_ref = *opt.p_ref;
  }
  if (!opt.out.empty()) cfg.report_path = opt.out;
  return cfg;
}

unsigned thread_count(const Options& opt) {
  if (opt.threads) return std::max(1u, *opt.threads);
  if (const char* env = std::getenv("SVRE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw svre::ConfigError("SVRE_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void emit(const nlohmann::json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw svre::ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

int cmd_run(const Options& opt) {
  const svre::RunConfig cfg = load(opt);
  const svre::LimitStateProblem problem = svre::make_problem(cfg.problem);
  const svre::EstimateReport report = svre::run_svre(problem, cfg.svre);
  emit(svre::report_json(report, cfg.problem, problem.dim(), cfg.svre), cfg.report_path);
  if (!cfg.samples_csv.empty()) {
    std::ofstream csv(cfg.samples_csv);
    if (!csv) throw svre::ConfigError("cannot write '" + cfg.samples_csv + "'");
    svre::write_samples_csv(csv, report);
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  switch (report.termination) {
    case svre::Termination::converged: return kConverged;
    case svre::Termination::aborted:
      std::cerr << "aborted: " << report.message << '\n';
      return kAborted;
    default: return kMaxIterations;
  }
}

struct OracleValue {
  double p = 0.0;
  std::string method;
  std::uint64_t n_samples = 0;
  double cov = 0.0;
};

std::optional<OracleValue> compute_oracle(const svre::RunConfig& cfg, const svre::LimitStateProblem& problem,
                                          unsigned threads) {
  const auto& o = cfg.oracle;
  const std::string method = o.method == "auto" ? (problem.reference_probability() ? "analytic" : "crude_mc") : o.method;
  if (method == "analytic") {
    const auto p = problem.reference_probability();
    if (!p) return std::nullopt;
    return OracleValue{*p, "analytic", 0, 0.0};
  }
  if (method == "crude_mc") {
    const svre::McEstimate mc = svre::crude_mc(problem, o.n_samples, o.seed, threads);
    return OracleValue{mc.p_hat, "crude_mc", mc.n_samples, mc.cov};
  }
  // mixture_is: four-branch design points, otherwise the HL-RF design point from the origin
  std::vector<svre::Vector> centers;
  if (cfg.problem.id == "fourbranch" && problem.dim() == 2) {
    double gamma = 0.0;
    if (cfg.problem.params.contains("gamma")) gamma = cfg.problem.params["gamma"].get<double>();
    centers = svre::fourbranch_design_points(gamma);
  } else {
    centers.push_back(svre::design_point(problem.function(), svre::Vector::Zero(problem.dim())));
  }
  const std::vector<double> weights(centers.size(), 1.0);
  const svre::McEstimate is = svre::mixture_is(problem, centers, weights, o.n_samples, o.seed);
  return OracleValue{is.p_hat, "mixture_is", is.n_samples, is.cov};
}

int cmd_bench(const Options& opt) {
  const svre::RunConfig cfg = load(opt);
  const unsigned threads = thread_count(opt);
  const svre::LimitStateProblem problem = svre::make_problem(cfg.problem);

  double p_ref = 0.0;
  std::string source;
  if (cfg.p_ref) {
    p_ref = *cfg.p_ref;
    source = "override";
  } else if (const auto analytic = problem.reference_probability()) {
    p_ref = *analytic;
    source = "analytic";
  } else if (!cfg.oracle_given) {
    throw svre::ConfigError("no reference probability for problem '" + cfg.problem.id +
                            "': pass --p-ref or add an oracle section");
  } else {
    const auto o = compute_oracle(cfg, problem, threads);
    if (!o || !(o->p > 0.0)) throw svre::ConfigError("oracle produced no usable reference probability");
    p_ref = o->p;
    source = o->method;
  }

  const auto runs = svre::run_benchmark(problem, cfg.svre, cfg.runs, threads);
  const svre::BenchmarkResult result = svre::rrmse(runs, p_ref, cfg.exclusion_threshold);
  // default table name follows the report: bench.json -> bench.runs.csv
  std::string csv_path = cfg.runs_csv;
  if (csv_path.empty()) {
    csv_path = cfg.report_path.empty() ? "runs.csv" : cfg.report_path;
    if (const auto dot = csv_path.rfind('.'); dot != std::string::npos && csv_path.find('/', dot) == std::string::npos)
      csv_path.erase(dot);
    if (!cfg.report_path.empty()) csv_path += ".runs.csv";
    else csv_path += ".csv";
  }
  std::ofstream csv(csv_path);
  if (!csv) throw svre::ConfigError("cannot write '" + csv_path + "'");
  svre::write_runs_csv(csv, runs);
  emit(svre::bench_json(result, cfg.problem, problem.dim(), cfg.svre, source, cfg.exclusion_threshold, threads),
       cfg.report_path);
  return kConverged;
}

int cmd_oracle(const Options& opt) {
  const svre::RunConfig cfg = load(opt);
  const svre::LimitStateProblem problem = svre::make_problem(cfg.problem);
  const auto o = compute_oracle(cfg, problem, thread_count(opt));
  if (!o) throw svre::ConfigError("no analytic reference for problem '" + cfg.problem.id + "'");
  emit(svre::oracle_json(cfg.problem, problem.dim(), o->p, o->method, o->n_samples, o->cov), cfg.report_path);
  return kConverged;
}

int cmd_gradcheck(const Options& opt) {
  constexpr double kStep = 1e-6;
  constexpr double kTol = 1e-5;
  constexpr int kPoints = 20;
  const svre::RunConfig cfg = load(opt);
  const svre::LimitStateProblem problem = svre::make_problem(cfg.problem);
  const auto* four = dynamic_cast<const svre::FourBranchLsf*>(&problem.function());

  std::mt19937_64 rng(cfg.svre.seed);
  std::normal_distribution<double> z;
  nlohmann::json points = nlohmann::json::array();
  int checked = 0, failed = 0, skipped = 0;
  double worst = 0.0;
  svre::Vector x(problem.dim());
  for (int k = 0; k < kPoints; ++k) {
    for (int j = 0; j < problem.dim(); ++j) x[j] = 2.0 * z(rng);
    if (four) {
      // the minimum is not differentiable where two branches tie
      auto b = four->branches(x);
      std::sort(b.begin(), b.end());
      if (b[1] - b[0] < 1e-3) {
        ++skipped;
        continue;
      }
    }
    const double err = svre::gradient_check(problem, x, kStep);
    const bool ok = err <= kTol;
    ++checked;
    if (!ok) ++failed;
    worst = std::max(worst, err);
    points.push_back({{"point", std::vector<double>(x.data(), x.data() + x.size())},
                      {"max_rel_error", svre::detail::number_or_null(err)},
                      {"pass", ok}});
  }
  const nlohmann::json out{{"schema_version", svre::kSchemaVersion},
                           {"kind", "gradcheck"},
                           {"problem", svre::problem_json(cfg.problem, problem.dim())},
                           {"step", kStep},
                           {"tolerance", kTol},
                           {"checked", checked},
                           {"skipped", skipped},
                           {"failed", failed},
                           {"max_rel_error", svre::detail::number_or_null(worst)},
                           {"points", points}};
  emit(out, cfg.report_path);
  return failed == 0 ? kConverged : kGradcheckFailed;
}

int cmd_list_problems() {
  std::cout << "linear      g = beta - sum(x)/sqrt(d)             params: d, beta\n"
               "quadratic   linear plus curvature kappa/4 (x1-x2)^2  params: d, beta, kappa\n"
               "fourbranch  series system of four branches         params: gamma\n"
               "darcy       1-D aquifer pressure head threshold    params: d, grid_m, mu_lnk, var_lnk, corr_len,\n"
               "                                                   mu_F, var_F, p_thresh, source_sign\n";
  return kConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stein variational rare event estimator"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON configuration file")->required();
    sub->add_option("--out", opt.out, "write the JSON result here instead of stdout");
    sub->add_option("--seed", opt.seed, "master seed, overrides svre.seed in the config");
    sub->add_option("--threads", opt.threads, "worker threads (default: $SVRE_THREADS, else all cores)");
  };
  auto* run = app.add_subcommand("run", "single SVRE run");
  add_common(run);
  auto* bench = app.add_subcommand("bench", "repeated seeded runs and rRMSE against a reference");
  add_common(bench);
  bench->add_option("--runs", opt.runs, "number of runs, overrides bench.runs");
  bench->add_option("--p-ref", opt.p_ref, "reference probability, overrides analytic and oracle values");
  auto* oracle = app.add_subcommand("oracle", "reference probability by quadrature or sampling");
  add_common(oracle);
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the limit-state gradient");
  add_common(grad);
  auto* list = app.add_subcommand("list-problems", "print the available problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*bench) return cmd_bench(opt);
    if (*oracle) return cmd_oracle(opt);
    if (*grad) return cmd_gradcheck(opt);
    if (*list) return cmd_list_problems();
  } catch (const svre::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const svre::AbortError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kAborted;
  }
  return kConfigError;
}
