#pragma once

#include "svre/benchmarks.hpp"
#include "svre/darcy.hpp"
#include "svre/estimator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace svre {

struct ProblemSpec {
  std::string id;
  nlohmann::json params = nlohmann::json::object();
};

struct OracleSettings {
  std::string method = "auto";  // auto | crude_mc | mixture_is | analytic
  std::uint64_t n_samples = 1'000'000;
  std::uint64_t seed = 12345;
};

/// Everything a CLI invocation needs, validated up front.
struct RunConfig {
  ProblemSpec problem;
  SvreConfig svre;
  std::string report_path;
  std::string samples_csv;
  std::string runs_csv;
  int runs = 100;
  std::optional<double> p_ref;
  double exclusion_threshold = 0.5;
  OracleSettings oracle;
  bool oracle_given = false;
};

inline const std::vector<std::string>& problem_ids() {
  static const std::vector<std::string> ids{"linear", "quadratic", "fourbranch", "darcy"};
  return ids;
}

namespace detail {

/// 1-based line of the key at the end of `path` inside the config text, or 0.
inline int locate_key(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const std::size_t found = text.find("\"" + key + "\"", pos);
    if (found == std::string::npos) return 0;
    pos = found;
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  explicit ConfigReader(std::string text) : text_(std::move(text)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
    std::ostringstream os;
    os << "config";
    if (const int line = locate_key(text_, path); line > 0) os << ":" << line;
    os << ": " << dotted << ": " << msg;
    throw ConfigError(os.str());
  }

  void reject_unknown(const nlohmann::json& obj, const std::vector<std::string>& path,
                      std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  template <typename T>
  void read(const nlohmann::json& obj, const std::vector<std::string>& section, const char* key, T& out) const {
    if (!obj.contains(key)) return;
    auto path = section;
    path.push_back(key);
    const auto& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0) fail(path, "expected a non-negative integer");
      }
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      out = v.get<T>();
    } else {
      if (!v.is_string()) fail(path, "expected a string");
      out = v.get<std::string>();
    }
  }

  template <typename Fn>
  void check(const std::vector<std::string>& path, Fn&& fn) const {
    try {
      fn();
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }

 private:
  std::string text_;
};

}  // namespace detail

inline LimitStateProblem make_problem(const ProblemSpec& spec, const std::string& text = {}) {
  const detail::ConfigReader rd(text);
  const std::vector<std::string> sec{"problem"};
  const auto& p = spec.params;
  try {
    if (spec.id == "linear") {
      rd.reject_unknown(p, sec, {"id", "d", "beta"});
      int d = 100;
      double beta = 4.0;
      rd.read(p, sec, "d", d);
      rd.read(p, sec, "beta", beta);
      return linear_lsf(d, beta);
    }
    if (spec.id == "quadratic") {
      rd.reject_unknown(p, sec, {"id", "d", "beta", "kappa"});
      int d = 2;
      double beta = 4.0, kappa = 10.0;
      rd.read(p, sec, "d", d);
      rd.read(p, sec, "beta", beta);
      rd.read(p, sec, "kappa", kappa);
      return quadratic_lsf(d, beta, kappa);
    }
    if (spec.id == "fourbranch") {
      rd.reject_unknown(p, sec, {"id", "gamma", "d"});
      double gamma = 0.0;
      int d = 2;
      rd.read(p, sec, "gamma", gamma);
      rd.read(p, sec, "d", d);
      return fourbranch_lsf(gamma, d);
    }
    if (spec.id == "darcy") {
      rd.reject_unknown(p, sec, {"id", "d", "grid_m", "mu_lnk", "var_lnk", "corr_len", "mu_F", "var_F", "p_thresh",
                                 "source_sign"});
      darcy::DarcyConfig c;
      rd.read(p, sec, "d", c.d);
      rd.read(p, sec, "grid_m", c.grid_m);
      rd.read(p, sec, "mu_lnk", c.mu_lnk);
      rd.read(p, sec, "var_lnk", c.var_lnk);
      rd.read(p, sec, "corr_len", c.corr_len);
      rd.read(p, sec, "mu_F", c.mu_F);
      rd.read(p, sec, "var_F", c.var_F);
      rd.read(p, sec, "p_thresh", c.p_thresh);
      rd.read(p, sec, "source_sign", c.source_sign);
      return darcy::darcy_lsf(c);
    }
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind("config", 0) == 0) throw;
    rd.fail(sec, what);
  }
  rd.fail({"problem", "id"}, "unknown problem '" + spec.id + "' (expected linear, quadratic, fourbranch or darcy)");
}

/// Parse and validate a run configuration. `text` is the raw file content, used
/// to attach line numbers to error messages.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::string& text = {}) {
  const detail::ConfigReader rd(text);
  RunConfig cfg;
  rd.reject_unknown(j, {}, {"problem", "svre", "smoother", "kernel", "transport", "output", "bench", "oracle", "darcy"});

  if (!j.contains("problem")) rd.fail({"problem"}, "missing required section");
  const auto& prob = j.at("problem");
  rd.reject_unknown(prob, {"problem"}, {"id", "d", "beta", "kappa", "gamma", "grid_m", "mu_lnk", "var_lnk", "corr_len",
                                        "mu_F", "var_F", "p_thresh", "source_sign"});
  if (!prob.contains("id")) rd.fail({"problem", "id"}, "missing problem id");
  rd.read(prob, {"problem"}, "id", cfg.problem.id);
  cfg.problem.params = prob;
  if (j.contains("darcy")) {
    // darcy.* keys are an alternative spelling of the darcy problem parameters
    const auto& dj = j.at("darcy");
    rd.reject_unknown(dj, {"darcy"}, {"d", "grid_m", "mu_lnk", "var_lnk", "corr_len", "mu_F", "var_F", "p_thresh",
                                      "source_sign"});
    if (cfg.problem.id != "darcy") rd.fail({"darcy"}, "section only applies to problem id 'darcy'");
    for (const auto& [key, value] : dj.items()) {
      if (prob.contains(key)) rd.fail({"darcy", key}, "also given in the problem section");
      cfg.problem.params[key] = value;
    }
  }

  SvreConfig& s = cfg.svre;
  if (j.contains("svre")) {
    const auto& o = j.at("svre");
    const std::vector<std::string> sec{"svre"};
    rd.reject_unknown(o, sec, {"n", "n_grad", "delta_thresh", "t_max", "seed", "init", "scramble"});
    rd.read(o, sec, "n", s.n);
    rd.read(o, sec, "n_grad", s.n_grad);
    rd.read(o, sec, "delta_thresh", s.delta_thresh);
    rd.read(o, sec, "t_max", s.t_max);
    rd.read(o, sec, "seed", s.seed);
    rd.read(o, sec, "scramble", s.scramble);
    std::string init = to_string(s.init);
    rd.read(o, sec, "init", init);
    if (init == "sobol") s.init = InitMethod::sobol;
    else if (init == "lhs") s.init = InitMethod::lhs;
    else rd.fail({"svre", "init"}, "expected 'sobol' or 'lhs'");
    if (s.n < 2) rd.fail({"svre", "n"}, "must be >= 2");
    if (s.n_grad < 1) rd.fail({"svre", "n_grad"}, "must be >= 1");
    if (!(s.delta_thresh > 0.0)) rd.fail({"svre", "delta_thresh"}, "must be positive");
    if (s.t_max < 0) rd.fail({"svre", "t_max"}, "must be >= 0");
  }
  if (j.contains("smoother")) {
    const auto& o = j.at("smoother");
    const std::vector<std::string> sec{"smoother"};
    rd.reject_unknown(o, sec, {"P", "sigma"});
    double P = s.smoother.P, sigma = s.smoother.sigma;
    rd.read(o, sec, "P", P);
    rd.read(o, sec, "sigma", sigma);
    rd.check({"smoother", "P"}, [&] { s.smoother = SmootherParams::from_mass(P, sigma); });
  }
  if (j.contains("kernel")) {
    const auto& o = j.at("kernel");
    const std::vector<std::string> sec{"kernel"};
    rd.reject_unknown(o, sec, {"strategy", "length"});
    std::string strategy = to_string(s.kernel.strategy);
    rd.read(o, sec, "strategy", strategy);
    if (strategy == "median") s.kernel.strategy = BandwidthStrategy::median;
    else if (strategy == "fixed") s.kernel.strategy = BandwidthStrategy::fixed;
    else rd.fail({"kernel", "strategy"}, "expected 'median' or 'fixed'");
    rd.read(o, sec, "length", s.kernel.fixed_length);
    rd.check({"kernel", "length"}, [&] { s.kernel.validate(); });
  }
  if (j.contains("transport")) {
    const auto& o = j.at("transport");
    const std::vector<std::string> sec{"transport"};
    rd.reject_unknown(o, sec, {"normalization", "base_rate", "rate_policy", "det_mode", "corridor", "alpha", "nugget",
                               "rmsprop_jacobian"});
    TransportConfig& t = s.transport;
    std::string norm = to_string(t.normalization), policy = to_string(t.rate_policy), det = to_string(t.det_mode);
    rd.read(o, sec, "normalization", norm);
    rd.read(o, sec, "rate_policy", policy);
    rd.read(o, sec, "det_mode", det);
    std::string rjac = to_string(t.rmsprop_jacobian);
    rd.read(o, sec, "rmsprop_jacobian", rjac);
    if (rjac == "chain") t.rmsprop_jacobian = RmspropJacobian::chain;
    else if (rjac == "frozen") t.rmsprop_jacobian = RmspropJacobian::frozen;
    else rd.fail({"transport", "rmsprop_jacobian"}, "expected 'chain' or 'frozen'");
    rd.read(o, sec, "base_rate", t.base_rate);
    rd.read(o, sec, "alpha", t.alpha);
    rd.read(o, sec, "nugget", t.nugget);
    if (norm == "l2") t.normalization = Normalization::l2;
    else if (norm == "rmsprop") t.normalization = Normalization::rmsprop;
    else rd.fail({"transport", "normalization"}, "expected 'l2' or 'rmsprop'");
    if (policy == "constant") t.rate_policy = RatePolicy::constant;
    else if (policy == "adaptive") t.rate_policy = RatePolicy::adaptive;
    else rd.fail({"transport", "rate_policy"}, "expected 'constant' or 'adaptive'");
    if (det == "exact") t.det_mode = DetMode::exact;
    else if (det == "trace") t.det_mode = DetMode::trace;
    else if (det == "auto") t.det_mode = DetMode::automatic;
    else rd.fail({"transport", "det_mode"}, "expected 'exact', 'trace' or 'auto'");
    if (o.contains("corridor")) {
      const auto& c = o.at("corridor");
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
        rd.fail({"transport", "corridor"}, "expected [lower, upper]");
      t.corridor_lo = c[0].get<double>();
      t.corridor_hi = c[1].get<double>();
    }
    rd.check({"transport"}, [&] { t.validate(); });
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    const std::vector<std::string> sec{"output"};
    rd.reject_unknown(o, sec, {"report", "samples_csv", "runs_csv"});
    rd.read(o, sec, "report", cfg.report_path);
    rd.read(o, sec, "samples_csv", cfg.samples_csv);
    rd.read(o, sec, "runs_csv", cfg.runs_csv);
  }
  if (j.contains("bench")) {
    const auto& o = j.at("bench");
    const std::vector<std::string> sec{"bench"};
    rd.reject_unknown(o, sec, {"runs", "p_ref", "exclusion_threshold"});
    rd.read(o, sec, "runs", cfg.runs);
    rd.read(o, sec, "exclusion_threshold", cfg.exclusion_threshold);
    if (o.contains("p_ref")) {
      double p = 0.0;
      rd.read(o, sec, "p_ref", p);
      if (!(p > 0.0)) rd.fail({"bench", "p_ref"}, "must be positive");
      cfg.p_ref = p;
    }
    if (cfg.runs < 2) rd.fail({"bench", "runs"}, "must be >= 2");
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    const std::vector<std::string> sec{"oracle"};
    cfg.oracle_given = true;
    rd.reject_unknown(o, sec, {"method", "n_samples", "seed"});
    rd.read(o, sec, "method", cfg.oracle.method);
    rd.read(o, sec, "n_samples", cfg.oracle.n_samples);
    rd.read(o, sec, "seed", cfg.oracle.seed);
    const auto& m = cfg.oracle.method;
    if (m != "auto" && m != "crude_mc" && m != "mixture_is" && m != "analytic")
      rd.fail({"oracle", "method"}, "expected 'auto', 'crude_mc', 'mixture_is' or 'analytic'");
    if (cfg.oracle.n_samples < 1) rd.fail({"oracle", "n_samples"}, "must be >= 1");
  }
  make_problem(cfg.problem, text);  // parameter errors surface here, with line numbers
  return cfg;
}

/// Parse raw JSON text; syntax errors carry the parser's line and column.
inline RunConfig parse_run_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_run_config(j, text);
}

}  // namespace svre
