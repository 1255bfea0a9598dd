#include "core/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/dof.hpp"
#include "core/harness.hpp"
#include "core/solver.hpp"

namespace krr {

namespace {

// Display precision for summaries; data files get the full 17 digits.
std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_or_na(double v) { return std::isnan(v) ? "n/a" : fmt(v); }

std::string grid_str(const std::vector<std::size_t>& grid) {
  std::string s = "{";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(grid[i]);
  }
  return s + "}";
}

std::string describe_target(const Config& cfg) {
  if (cfg.target.kind == "power-law") return "power-law(s=" + fmt(cfg.target.s) + ")";
  if (cfg.target.kind == "first-mode") return "first-mode";
  return "explicit(" + std::to_string(cfg.target.coeffs.size()) + " coeffs)";
}

std::string kernel_label(const SpectralKernel& kernel) {
  return kernel.spec().law_name() + "/" + std::string(family_name(kernel.family()));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory '" + dir + "': " + ec.message());
}

std::string out_path(const Config& cfg, const std::string& ext) {
  return cfg.output.dir + "/" + cfg.experiment.id + ext;
}

const char* pass_str(bool ok) { return ok ? "pass" : "FAIL"; }

int run_rates(const Config& cfg, std::ostream& out, bool noisy) {
  ExperimentPlan plan = build_plan(cfg);
  if (noisy) plan.lambda = build_lambda_policy(cfg, "noisy-optimal", *plan.kernel, plan.target);
  const RateResult result = noisy ? noisy_rate_experiment(plan) : noiseless_rate_experiment(plan);

  out << result.kind << "  id=" << result.experiment_id << "  kernel=" << result.kernel_name
      << "  target=" << describe_target(cfg) << "\n";
  out << "penalty=" << result.lambda_policy << "  sigma=" << fmt(result.sigma)
      << "  reps=" << result.repetitions << "  m=" << result.m_trunc
      << "  n=" << grid_str(result.n_grid) << "\n";
  for (const RateSeries& series : result.series) {
    out << "  p=" << fmt(series.p) << "  slope=" << fmt(series.fit.slope) << " ["
        << fmt(series.fit.ci_lo) << ", " << fmt(series.fit.ci_hi)
        << "]  theory=" << fmt_or_na(series.theory_slope) << "  tol=" << fmt(series.slope_tol)
        << "  " << pass_str(series.slope_pass)
        << (series.truncation_warning ? "  [truncation warning: raise m_trunc]" : "") << "\n";
  }
  out << "result: " << (result.passed ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  std::string path;
  if (cfg.output.format == "csv") {
    path = out_path(cfg, ".csv");
    write_csv(result.rows, path);
  } else {
    path = out_path(cfg, ".json");
    write_text_file(json_summary(result), path);
  }
  if (cfg.output.plots) write_plot_data(result, cfg.output.dir);
  out << "files: " << path << (cfg.output.plots ? " + plot data" : "") << "\n";
  return result.passed ? 0 : 2;
}

int run_sweep(const Config& cfg, std::ostream& out) {
  ExperimentPlan plan = build_plan(cfg);
  plan.n_grid = {cfg.experiment.n};
  const LambdaSweepResult result = lambda_sweep(plan, cfg.experiment.lambda_grid);

  out << "lambda-sweep  id=" << result.experiment_id << "  kernel=" << result.kernel_name
      << "  target=" << describe_target(cfg) << "\n";
  out << "n=" << result.n << "  reps=" << result.repetitions << "  m=" << result.m_trunc
      << "  penalties=" << result.lambda_grid.size() << " in [" << fmt(result.lambda_grid.back())
      << ", " << fmt(result.lambda_grid.front()) << "]\n";
  for (std::size_t pi = 0; pi < result.p_list.size(); ++pi) {
    out << "  p=" << fmt(result.p_list[pi]) << "  mean error " << fmt(result.mean[pi].front())
        << " at lambda=" << fmt(result.lambda_grid.front()) << "  ->  "
        << fmt(result.mean[pi].back()) << " at lambda=" << fmt(result.lambda_grid.back()) << "\n";
  }
  out << "monotonicity violations beyond 2*std: " << result.violations << "\n";
  out << "result: " << (result.passed ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  std::string path;
  if (cfg.output.format == "csv") {
    path = out_path(cfg, ".csv");
    write_csv(result.rows, path);
  } else {
    path = out_path(cfg, ".json");
    write_text_file(json_summary(result), path);
  }
  out << "files: " << path << "\n";
  return result.passed ? 0 : 2;
}

int run_saturate(const Config& cfg, std::ostream& out) {
  const ExperimentPlan plan = build_plan(cfg);
  const SaturationResult result = saturation_scan(plan, cfg.experiment.s_list);

  out << "saturation  id=" << result.experiment_id << "  kernel=" << result.kernel_name
      << "  p=" << fmt(result.p) << "  n=" << grid_str(plan.n_grid)
      << "  reps=" << plan.repetitions << "\n";
  out << "      s       slope      theory  saturated  overlap-s2  matches\n";
  for (const SaturationRow& row : result.table) {
    std::ostringstream line;
    line << std::setw(7) << fmt(row.s) << std::setw(12) << fmt(row.fit.slope) << std::setw(12)
         << fmt_or_na(row.theory_slope) << std::setw(11) << (row.saturated ? "yes" : "no")
         << std::setw(12) << (row.ci_overlap_s2 ? "yes" : "no") << std::setw(9)
         << (row.matches_theory ? "yes" : "no");
    out << line.str() << "\n";
  }
  out << "result: " << (result.passed ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  std::string path;
  if (cfg.output.format == "csv") {
    path = out_path(cfg, ".csv");
    write_csv(result.rows, path);
  } else {
    path = out_path(cfg, ".json");
    write_text_file(json_summary(result), path);
  }
  out << "files: " << path << "\n";
  return result.passed ? 0 : 2;
}

int run_pscan(const Config& cfg, std::ostream& out) {
  const ExperimentPlan plan = build_plan(cfg);
  const PThresholdResult result =
      p_threshold_scan(plan, cfg.experiment.n_divergent, cfg.experiment.m_base);

  out << "p-threshold  id=" << result.experiment_id << "  kernel=" << result.kernel_name
      << "  target=" << describe_target(cfg) << "\n";
  out << "p0=" << fmt(result.p0) << "  divergent branch: n=" << result.n_divergent
      << ", m=" << result.m_base << " doubled to " << 2 * result.m_base << "\n";
  for (const PThresholdRow& row : result.table) {
    if (row.divergent_branch) {
      out << "  p=" << fmt(row.p) << "  error " << fmt(row.error_m) << " -> " << fmt(row.error_2m)
          << "  growth=" << fmt(row.growth_ratio) << "  "
          << (row.divergence_flag ? "diverges (expected past p0)" : "no growth flagged") << "\n";
    } else {
      out << "  p=" << fmt(row.p) << "  slope=" << fmt(row.fit.slope)
          << "  theory=" << fmt_or_na(row.theory_slope) << "  " << pass_str(row.slope_pass)
          << "\n";
    }
  }
  out << "result: " << (result.passed ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  std::string path;
  if (cfg.output.format == "csv") {
    path = out_path(cfg, ".csv");
    write_csv(result.rows, path);
  } else {
    path = out_path(cfg, ".json");
    write_text_file(json_summary(result), path);
  }
  out << "files: " << path << "\n";
  return result.passed ? 0 : 2;
}

int run_dof(const Config& cfg, std::ostream& out) {
  const auto kernel = build_kernel(cfg);
  const double gamma = cfg.experiment.gamma;
  const bool optimal = cfg.experiment.density == "optimal";
  std::vector<double> grid = cfg.experiment.lambda_grid;
  std::sort(grid.begin(), grid.end());

  std::ostringstream csv;
  csv << "gamma,lambda,n_gamma,f_gamma,density_tag\n";
  double max_gap = 0.0;
  bool divergence_warning = false;
  std::vector<std::pair<double, std::pair<double, double>>> rows;
  for (double lambda : grid) {
    const Density density =
        optimal ? optimal_density(kernel, gamma, lambda) : Density::uniform();
    DofQuery query(kernel, gamma, lambda, density);
    divergence_warning = divergence_warning || query.divergence_warning;
    const double n_val = n_gamma(query);
    const double f_val = f_gamma(query);
    if (optimal && n_val > 0.0) max_gap = std::max(max_gap, std::abs(f_val - n_val) / n_val);
    rows.push_back({lambda, {n_val, f_val}});
    csv << num(gamma) << "," << num(lambda) << "," << num(n_val) << "," << num(f_val) << ","
        << density.tag() << "\n";
  }

  out << "dof  kernel=" << kernel_label(*kernel) << "  gamma=" << fmt(gamma)
      << "  density=" << cfg.experiment.density << "  penalties=" << grid.size() << "\n";
  if (divergence_warning) {
    out << "warning: the gamma-power spectral sum shows no convergence at this truncation\n";
  }
  for (const auto& [lambda, nf] : rows) {
    out << "  lambda=" << fmt(lambda) << "  N=" << fmt(nf.first) << "  F=" << fmt(nf.second)
        << "\n";
  }

  bool passed = true;
  nlohmann::json checks;
  if (optimal) {
    const bool equal = max_gap <= 1e-6;
    out << "weighted-density equality: max |F-N|/N = " << fmt(max_gap) << " (tolerance 1e-06)  "
        << pass_str(equal) << "\n";
    checks["equality_gap"] = max_gap;
    passed = passed && equal;
  }

  // The scaling check needs at least 3 distinct positive penalties; for the
  // exponential law the log(1/lambda) comparison also needs them below 1.
  std::vector<double> scaling;
  for (double l : grid) {
    if (l > 0.0 && (kernel->spec().law_name() != "exponential" || l < 1.0)) {
      if (scaling.empty() || l > scaling.back()) scaling.push_back(l);
    }
  }
  if (scaling.size() >= 3) {
    const DofAsymptoticReport report = dof_asymptotic_check(kernel, gamma, scaling);
    if (report.fitted_slope) {
      out << "scaling: fitted log N / log lambda slope " << fmt(*report.fitted_slope) << " vs -1/beta = "
          << fmt(*report.expected_slope) << "  " << pass_str(report.pass) << "\n";
      checks["fitted_slope"] = *report.fitted_slope;
      checks["expected_slope"] = *report.expected_slope;
    } else if (report.ratio_min) {
      out << "scaling: N / log(1/lambda) in [" << fmt(*report.ratio_min) << ", "
          << fmt(*report.ratio_max) << "]  " << pass_str(report.pass) << "\n";
      checks["ratio_min"] = *report.ratio_min;
      checks["ratio_max"] = *report.ratio_max;
    } else if (report.n_at_zero) {
      out << "scaling: N at lambda -> 0 is " << fmt(*report.n_at_zero) << " of "
          << fmt(*report.mode_count) << " modes  " << pass_str(report.pass) << "\n";
      checks["n_at_zero"] = *report.n_at_zero;
    }
    passed = passed && report.pass;
  } else {
    out << "scaling check skipped: needs at least 3 distinct positive penalties\n";
  }
  out << "result: " << (passed ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  const std::string csv_path = out_path(cfg, ".csv");
  write_text_file(csv.str(), csv_path);
  out << "files: " << csv_path;
  if (cfg.output.format == "json") {
    nlohmann::json j;
    j["kind"] = "dof";
    j["kernel"] = kernel_label(*kernel);
    j["parameters"] = {{"gamma", gamma},
                       {"density", cfg.experiment.density},
                       {"penalties", grid.size()}};
    j["checks"] = checks;
    j["passed"] = passed;
    const std::string json_path = out_path(cfg, ".json");
    write_text_file(j.dump(2) + "\n", json_path);
    out << " " << json_path;
  }
  out << "\n";
  return passed ? 0 : 2;
}

int run_solve(const Config& cfg, std::ostream& out) {
  const auto kernel = build_kernel(cfg);
  const TargetFunction target = build_target(cfg, kernel->truncation());
  const auto& e = cfg.experiment;
  if (e.m_trunc > kernel->truncation()) {
    fail(ErrorCode::invalid_argument, "experiment.m_trunc exceeds the kernel's mode count");
  }
  const Dataset data =
      sample_dataset(target, kernel, e.n, Density::uniform(), e.sigma, e.seed);
  const KrrSolution sol = solve_krr(data, kernel, e.lambda);
  const SpectralResiduals residuals(sol, target, e.m_trunc);

  out << "solve  kernel=" << kernel_label(*kernel) << "  target=" << describe_target(cfg)
      << "  n=" << e.n << "  lambda=" << fmt(e.lambda) << "  sigma=" << fmt(e.sigma)
      << "  seed=" << e.seed << "\n";
  out << "relative residual " << fmt(sol.residual_rel) << ", kept rank " << sol.rank
      << (sol.used_fallback ? ", factorization fell back to the eigensolver" : "") << "\n";

  const Eigen::Index head = std::min<Eigen::Index>(8, sol.coeffs.size());
  std::vector<double> coeffs_head(sol.coeffs.data(), sol.coeffs.data() + head);
  out << "coeffs[0.." << head - 1 << "] =";
  for (double v : coeffs_head) out << " " << fmt(v);
  out << "\ncoeffs norm = " << fmt(sol.coeffs.norm()) << "\n";

  nlohmann::json series = nlohmann::json::array();
  for (double p : e.p_list) {
    const HpError err = residuals.error_sq(p);
    out << "  p=" << fmt(p) << "  error_sq=" << fmt(err.value)
        << (err.truncation_warning ? "  [truncation warning: raise m_trunc]" : "")
        << (err.divergent ? "  [tail grows: series looks non-convergent]" : "") << "\n";
    series.push_back({{"p", p},
                      {"error_sq", err.value},
                      {"last_block_fraction", err.last_block_fraction},
                      {"divergent", err.divergent},
                      {"truncation_warning", err.truncation_warning}});
  }

  nlohmann::json j;
  j["kind"] = "solve";
  j["kernel"] = kernel_label(*kernel);
  j["parameters"] = {{"n", e.n},
                     {"lambda", e.lambda},
                     {"sigma", e.sigma},
                     {"seed", e.seed},
                     {"m_trunc", e.m_trunc}};
  j["checks"] = {{"residual_rel", sol.residual_rel},
                 {"rank", sol.rank},
                 {"used_fallback", sol.used_fallback},
                 {"coeffs_norm", sol.coeffs.norm()},
                 {"coeffs_head", coeffs_head}};
  j["series"] = series;
  j["passed"] = true;

  ensure_dir(cfg.output.dir);
  const std::string path = out_path(cfg, ".json");
  write_text_file(j.dump(2) + "\n", path);
  out << "files: " << path << "\n";
  return 0;
}

int run_dirichlet(const Config& cfg, std::ostream& out) {
  const auto& e = cfg.experiment;
  DirichletReport worst;
  std::size_t failures = 0;
  for (std::size_t t = 0; t < e.dirichlet_trials; ++t) {
    const DirichletReport report = dirichlet_psd_check(e.dirichlet_m, e.dirichlet_n, e.seed + t);
    if (!report.passed) ++failures;
    if (t == 0 || report.min_eigenvalue < worst.min_eigenvalue) worst = report;
  }

  out << "dirichlet-psd  m=" << e.dirichlet_m << "  n=" << e.dirichlet_n
      << "  trials=" << e.dirichlet_trials << "  seeds=" << e.seed << ".."
      << e.seed + e.dirichlet_trials - 1 << "\n";
  out << "worst shifted min eigenvalue " << fmt(worst.min_eigenvalue) << " at seed " << worst.seed
      << " (tolerance -" << fmt(worst.tolerance) << ")\n";
  out << "failures: " << failures << "/" << e.dirichlet_trials << "\n";
  out << "result: " << (failures == 0 ? "PASS" : "FAIL") << "\n";

  ensure_dir(cfg.output.dir);
  const std::string path = out_path(cfg, ".json");
  write_text_file(json_summary(worst), path);
  out << "files: " << path << " (worst trial)\n";
  return failures == 0 ? 0 : 2;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"rates",  "noisy-rates", "sweep-lambda",
                                                 "saturate", "p-scan",    "dof",
                                                 "solve",  "dirichlet-check"};
  return names;
}

std::string subcommand_summary(const std::string& name) {
  if (name == "rates") return "noiseless convergence rates over a sample-size grid";
  if (name == "noisy-rates") return "noisy convergence rates under the noise-optimal penalty";
  if (name == "sweep-lambda") return "mean error across a penalty grid at one sample size";
  if (name == "saturate") return "rate saturation scan across target smoothness values";
  if (name == "p-scan") return "solution-smoothness scan across the convergence threshold";
  if (name == "dof") return "degrees-of-freedom table with scaling checks";
  if (name == "solve") return "one ridge solve with coefficient digest and error report";
  if (name == "dirichlet-check") return "positive-semidefiniteness check of the Dirichlet bound";
  return "";
}

int run_subcommand(const std::string& name, const Config& config, std::ostream& out) {
  if (name == "rates") return run_rates(config, out, false);
  if (name == "noisy-rates") return run_rates(config, out, true);
  if (name == "sweep-lambda") return run_sweep(config, out);
  if (name == "saturate") return run_saturate(config, out);
  if (name == "p-scan") return run_pscan(config, out);
  if (name == "dof") return run_dof(config, out);
  if (name == "solve") return run_solve(config, out);
  if (name == "dirichlet-check") return run_dirichlet(config, out);
  fail(ErrorCode::invalid_argument, "unknown subcommand: " + name);
}

}  // namespace krr
