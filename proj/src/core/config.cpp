#include "core/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <type_traits>

#include "core/common.hpp"
#include "core/dof.hpp"

namespace krr {

namespace {

using nlohmann::json;

// Collects every problem found while walking the JSON tree; parsing only
// aborts once the whole config has been examined, so one bad file surfaces
// all of its mistakes in a single message.
struct Walker {
  std::vector<std::string> errors;

  void add(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

  void get(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) return add(path, "expected a number");
    out = v.get<double>();
  }

  template <class T, std::enable_if_t<std::is_unsigned_v<T> && !std::is_same_v<T, bool>, int> = 0>
  void get(const json& v, const std::string& path, T& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      return add(path, "expected a non-negative integer");
    }
    out = v.get<T>();
  }

  void get(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) return add(path, "expected a string");
    out = v.get<std::string>();
  }

  void get(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) return add(path, "expected a boolean");
    out = v.get<bool>();
  }

  void get(const json& v, const std::string& path, std::vector<double>& out) {
    if (!v.is_array()) return add(path, "expected an array of numbers");
    std::vector<double> parsed;
    parsed.reserve(v.size());
    for (const json& item : v) {
      if (!item.is_number()) return add(path, "expected an array of numbers");
      parsed.push_back(item.get<double>());
    }
    out = std::move(parsed);
  }

  void get(const json& v, const std::string& path, std::vector<std::size_t>& out) {
    if (!v.is_array()) return add(path, "expected an array of non-negative integers");
    std::vector<std::size_t> parsed;
    parsed.reserve(v.size());
    for (const json& item : v) {
      if (!item.is_number_unsigned() &&
          !(item.is_number_integer() && item.get<std::int64_t>() >= 0)) {
        return add(path, "expected an array of non-negative integers");
      }
      parsed.push_back(item.get<std::size_t>());
    }
    out = std::move(parsed);
  }

  void require_object(const json& v, const std::string& path) {
    if (!v.is_object()) add(path, "expected an object");
  }
};

bool one_of(const std::string& value, std::initializer_list<const char*> allowed) {
  return std::any_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return value == a; });
}

void walk_kernel(Walker& w, const json& sec, KernelConfig& k) {
  w.require_object(sec, "kernel");
  if (!sec.is_object()) return;
  for (const auto& [key, value] : sec.items()) {
    const std::string path = "kernel." + key;
    if (key == "law") w.get(value, path, k.law);
    else if (key == "beta") w.get(value, path, k.beta);
    else if (key == "alpha") w.get(value, path, k.alpha);
    else if (key == "c") w.get(value, path, k.c);
    else if (key == "M") w.get(value, path, k.M);
    else if (key == "family") w.get(value, path, k.family);
    else if (key == "mu") w.get(value, path, k.mu);
    else w.add(path, "unknown key");
  }
}

void walk_target(Walker& w, const json& sec, TargetConfig& t) {
  w.require_object(sec, "target");
  if (!sec.is_object()) return;
  for (const auto& [key, value] : sec.items()) {
    const std::string path = "target." + key;
    if (key == "kind") w.get(value, path, t.kind);
    else if (key == "s") w.get(value, path, t.s);
    else if (key == "coeffs") w.get(value, path, t.coeffs);
    else w.add(path, "unknown key");
  }
}

void walk_experiment(Walker& w, const json& sec, ExperimentConfig& e) {
  w.require_object(sec, "experiment");
  if (!sec.is_object()) return;
  for (const auto& [key, value] : sec.items()) {
    const std::string path = "experiment." + key;
    if (key == "id") w.get(value, path, e.id);
    else if (key == "p_list") w.get(value, path, e.p_list);
    else if (key == "n_grid") w.get(value, path, e.n_grid);
    else if (key == "n") w.get(value, path, e.n);
    else if (key == "lambda_policy") w.get(value, path, e.lambda_policy);
    else if (key == "lambda") w.get(value, path, e.lambda);
    else if (key == "lambda_c") w.get(value, path, e.lambda_c);
    else if (key == "lambda_grid") w.get(value, path, e.lambda_grid);
    else if (key == "sigma") w.get(value, path, e.sigma);
    else if (key == "reps") w.get(value, path, e.reps);
    else if (key == "seed") w.get(value, path, e.seed);
    else if (key == "m_trunc") w.get(value, path, e.m_trunc);
    else if (key == "slope_tol") w.get(value, path, e.slope_tol);
    else if (key == "s_list") w.get(value, path, e.s_list);
    else if (key == "n_divergent") w.get(value, path, e.n_divergent);
    else if (key == "m_base") w.get(value, path, e.m_base);
    else if (key == "gamma") w.get(value, path, e.gamma);
    else if (key == "density") w.get(value, path, e.density);
    else if (key == "dirichlet_m") w.get(value, path, e.dirichlet_m);
    else if (key == "dirichlet_n") w.get(value, path, e.dirichlet_n);
    else if (key == "dirichlet_trials") w.get(value, path, e.dirichlet_trials);
    else w.add(path, "unknown key");
  }
}

void walk_output(Walker& w, const json& sec, OutputConfig& o) {
  w.require_object(sec, "output");
  if (!sec.is_object()) return;
  for (const auto& [key, value] : sec.items()) {
    const std::string path = "output." + key;
    if (key == "dir") w.get(value, path, o.dir);
    else if (key == "format") w.get(value, path, o.format);
    else if (key == "plots") w.get(value, path, o.plots);
    else w.add(path, "unknown key");
  }
}

void validate(Walker& w, const Config& c) {
  const KernelConfig& k = c.kernel;
  if (!one_of(k.law, {"brownian", "power", "power-log", "exponential", "explicit"})) {
    w.add("kernel.law", "must be one of brownian, power, power-log, exponential, explicit");
  }
  if (!one_of(k.family, {"brownian-sine", "torus-fourier", "abstract-indicator"})) {
    w.add("kernel.family", "must be one of brownian-sine, torus-fourier, abstract-indicator");
  }
  if (!(k.beta > 1.0) || !std::isfinite(k.beta)) w.add("kernel.beta", "decay exponent must exceed 1");
  if (!(k.alpha >= 0.0) || !std::isfinite(k.alpha)) {
    w.add("kernel.alpha", "log-correction exponent must be non-negative");
  }
  if (k.law == "exponential") {
    if (!(k.c > 0.0 && k.c < 1.0)) w.add("kernel.c", "exponential ratio must lie in (0, 1)");
  } else if (!(k.c > 0.0) || !std::isfinite(k.c)) {
    w.add("kernel.c", "scale must be positive");
  }
  if (k.M == 0) w.add("kernel.M", "mode count must be positive");
  if (k.law == "explicit") {
    if (k.mu.empty()) w.add("kernel.mu", "explicit law needs at least one eigenvalue");
    bool ordered = true;
    for (std::size_t j = 0; j < k.mu.size(); ++j) {
      if (!(k.mu[j] > 0.0) || !std::isfinite(k.mu[j])) ordered = false;
      if (j > 0 && k.mu[j] > k.mu[j - 1]) ordered = false;
    }
    if (!k.mu.empty() && !ordered) {
      w.add("kernel.mu", "explicit eigenvalues must be positive and non-increasing");
    }
  }

  const TargetConfig& t = c.target;
  if (!one_of(t.kind, {"power-law", "first-mode", "explicit"})) {
    w.add("target.kind", "must be one of power-law, first-mode, explicit");
  }
  if (!(t.s > 0.0) || !std::isfinite(t.s)) w.add("target.s", "smoothness must be positive");
  if (t.kind == "explicit" && t.coeffs.empty()) {
    w.add("target.coeffs", "explicit target needs at least one coefficient");
  }

  const ExperimentConfig& e = c.experiment;
  if (e.id.empty()) w.add("experiment.id", "must not be empty");
  if (e.p_list.empty()) w.add("experiment.p_list", "must not be empty");
  for (double p : e.p_list) {
    if (!std::isfinite(p)) {
      w.add("experiment.p_list", "entries must be finite");
      break;
    }
  }
  if (e.n_grid.empty()) w.add("experiment.n_grid", "must not be empty");
  for (std::size_t n : e.n_grid) {
    if (n == 0) {
      w.add("experiment.n_grid", "sample sizes must be positive");
      break;
    }
  }
  if (e.n == 0) w.add("experiment.n", "sample size must be positive");
  if (!one_of(e.lambda_policy, {"fixed", "pseudo-zero", "noisy-optimal"})) {
    w.add("experiment.lambda_policy", "must be one of fixed, pseudo-zero, noisy-optimal");
  }
  if (!(e.lambda >= 0.0) || !std::isfinite(e.lambda)) {
    w.add("experiment.lambda", "penalty must be finite and non-negative");
  }
  if (!(e.lambda_c > 0.0) || !std::isfinite(e.lambda_c)) {
    w.add("experiment.lambda_c", "prefactor must be positive");
  }
  if (e.lambda_grid.empty()) w.add("experiment.lambda_grid", "must not be empty");
  for (double l : e.lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      w.add("experiment.lambda_grid", "entries must be finite and non-negative");
      break;
    }
  }
  if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma)) {
    w.add("experiment.sigma", "noise level must be finite and non-negative");
  }
  if (e.reps == 0) w.add("experiment.reps", "repetition count must be positive");
  if (e.m_trunc == 0) w.add("experiment.m_trunc", "mode truncation must be positive");
  if (!(e.slope_tol >= 0.0) || !std::isfinite(e.slope_tol)) {
    w.add("experiment.slope_tol", "tolerance must be finite and non-negative");
  }
  if (e.s_list.empty()) w.add("experiment.s_list", "must not be empty");
  for (double s : e.s_list) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      w.add("experiment.s_list", "smoothness values must be finite and positive");
      break;
    }
  }
  if (e.n_divergent == 0) w.add("experiment.n_divergent", "sample size must be positive");
  if (e.m_base == 0) w.add("experiment.m_base", "mode truncation must be positive");
  if (!(e.gamma > 0.0) || !std::isfinite(e.gamma)) {
    w.add("experiment.gamma", "order must be positive");
  }
  if (!one_of(e.density, {"uniform", "optimal"})) {
    w.add("experiment.density", "must be one of uniform, optimal");
  }
  if (e.density == "optimal") {
    for (double l : e.lambda_grid) {
      if (l == 0.0) {
        w.add("experiment.lambda_grid", "the weighted density needs positive penalties");
        break;
      }
    }
  }
  if (e.dirichlet_m % 2 != 0) w.add("experiment.dirichlet_m", "degree must be even");
  if (e.dirichlet_n == 0) w.add("experiment.dirichlet_n", "point count must be positive");
  if (e.dirichlet_trials == 0) w.add("experiment.dirichlet_trials", "trial count must be positive");

  const OutputConfig& o = c.output;
  if (o.dir.empty()) w.add("output.dir", "must not be empty");
  if (!one_of(o.format, {"csv", "json"})) w.add("output.format", "must be one of csv, json");
}

}  // namespace

Config parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorCode::parse, "config root must be a JSON object");

  Config config;
  Walker w;
  for (const auto& [key, value] : root.items()) {
    if (key == "kernel") walk_kernel(w, value, config.kernel);
    else if (key == "target") walk_target(w, value, config.target);
    else if (key == "experiment") walk_experiment(w, value, config.experiment);
    else if (key == "output") walk_output(w, value, config.output);
    else w.add(key, "unknown key");
  }
  if (w.errors.empty()) validate(w, config);
  if (!w.errors.empty()) {
    std::string msg = "config validation failed:";
    for (const std::string& e : w.errors) msg += "\n  " + e;
    fail(ErrorCode::parse, msg);
  }
  return config;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string emit_config(const Config& config) {
  nlohmann::ordered_json j;
  j["kernel"] = {{"law", config.kernel.law},       {"beta", config.kernel.beta},
                 {"alpha", config.kernel.alpha},   {"c", config.kernel.c},
                 {"M", config.kernel.M},           {"family", config.kernel.family},
                 {"mu", config.kernel.mu}};
  j["target"] = {{"kind", config.target.kind},
                 {"s", config.target.s},
                 {"coeffs", config.target.coeffs}};
  j["experiment"] = {{"id", config.experiment.id},
                     {"p_list", config.experiment.p_list},
                     {"n_grid", config.experiment.n_grid},
                     {"n", config.experiment.n},
                     {"lambda_policy", config.experiment.lambda_policy},
                     {"lambda", config.experiment.lambda},
                     {"lambda_c", config.experiment.lambda_c},
                     {"lambda_grid", config.experiment.lambda_grid},
                     {"sigma", config.experiment.sigma},
                     {"reps", config.experiment.reps},
                     {"seed", config.experiment.seed},
                     {"m_trunc", config.experiment.m_trunc},
                     {"slope_tol", config.experiment.slope_tol},
                     {"s_list", config.experiment.s_list},
                     {"n_divergent", config.experiment.n_divergent},
                     {"m_base", config.experiment.m_base},
                     {"gamma", config.experiment.gamma},
                     {"density", config.experiment.density},
                     {"dirichlet_m", config.experiment.dirichlet_m},
                     {"dirichlet_n", config.experiment.dirichlet_n},
                     {"dirichlet_trials", config.experiment.dirichlet_trials}};
  j["output"] = {{"dir", config.output.dir},
                 {"format", config.output.format},
                 {"plots", config.output.plots}};
  return j.dump(2) + "\n";
}

std::shared_ptr<const SpectralKernel> build_kernel(const Config& config) {
  const KernelConfig& k = config.kernel;
  SpectrumSpec spec = SpectrumSpec::brownian(k.M);
  if (k.law == "power") spec = SpectrumSpec::power(k.beta, k.c, k.M);
  else if (k.law == "power-log") spec = SpectrumSpec::power_log(k.beta, k.alpha, k.M);
  else if (k.law == "exponential") spec = SpectrumSpec::exponential(k.c, k.M);
  else if (k.law == "explicit") spec = SpectrumSpec::explicit_values(k.mu);
  else if (k.law != "brownian") fail(ErrorCode::internal, "unhandled kernel law " + k.law);

  EigenFamily family = EigenFamily::brownian_sine;
  if (k.family == "torus-fourier") family = EigenFamily::torus_fourier;
  else if (k.family == "abstract-indicator") family = EigenFamily::abstract_indicator;
  else if (k.family != "brownian-sine") fail(ErrorCode::internal, "unhandled family " + k.family);

  return std::make_shared<SpectralKernel>(std::move(spec), family);
}

TargetFunction build_target(const Config& config, std::size_t modes) {
  const TargetConfig& t = config.target;
  if (t.kind == "power-law") return make_power_law_target(t.s, modes);
  if (t.kind == "first-mode") return make_first_mode_target(modes);
  if (t.kind == "explicit") {
    if (t.coeffs.size() > modes) {
      fail(ErrorCode::invalid_argument, "target.coeffs has more entries than the kernel has modes");
    }
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(modes));
    for (std::size_t j = 0; j < t.coeffs.size(); ++j) {
      coeffs[static_cast<Eigen::Index>(j)] = t.coeffs[j];
    }
    return make_explicit_target(std::move(coeffs));
  }
  fail(ErrorCode::internal, "unhandled target kind " + t.kind);
}

LambdaPolicy build_lambda_policy(const Config& config, const std::string& policy_name,
                                 const SpectralKernel& kernel, const TargetFunction& target) {
  if (policy_name == "fixed") return LambdaPolicy::fixed(config.experiment.lambda);
  if (policy_name == "pseudo-zero") return LambdaPolicy::pseudo_zero();
  if (policy_name == "noisy-optimal") {
    const auto beta = kernel.spec().decay_exponent();
    if (!beta) fail(ErrorCode::domain, "noise-optimal penalty needs a polynomial spectral decay");
    if (std::isnan(target.s)) {
      fail(ErrorCode::invalid_argument, "noise-optimal penalty needs a labeled target smoothness");
    }
    return LambdaPolicy::noisy_optimal(config.experiment.lambda_c, std::min(target.s, 2.0), *beta);
  }
  fail(ErrorCode::internal, "unhandled penalty policy " + policy_name);
}

ExperimentPlan build_plan(const Config& config) {
  ExperimentPlan plan;
  plan.kernel = build_kernel(config);
  plan.target = build_target(config, plan.kernel->truncation());
  plan.p_list = config.experiment.p_list;
  plan.n_grid = config.experiment.n_grid;
  plan.lambda = build_lambda_policy(config, config.experiment.lambda_policy, *plan.kernel,
                                    plan.target);
  plan.sigma = config.experiment.sigma;
  plan.repetitions = config.experiment.reps;
  plan.base_seed = config.experiment.seed;
  plan.m_trunc = config.experiment.m_trunc;
  if (config.experiment.density == "optimal") {
    plan.density = optimal_density(plan.kernel, config.experiment.gamma, config.experiment.lambda);
  }
  plan.experiment_id = config.experiment.id;
  plan.slope_tol = config.experiment.slope_tol;
  return plan;
}

}  // namespace krr
