#include "core/harness.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"
#include "core/solver.hpp"

namespace krr {

namespace {

constexpr const char* kCsvHeader = "experiment_id,kernel,s,p,n,lambda,sigma,rep,error_sq,m_trunc";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string kernel_display_name(const SpectralKernel& kernel) {
  return kernel.spec().law_name() + "/" + family_name(kernel.family());
}

// Sample mean, sample standard deviation, and standard error of the mean for
// one cell of `reps` consecutive values.
void summarize(const double* values, std::size_t reps, double& mean, double& stddev,
               double& std_error) {
  double sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) sum += values[r];
  mean = sum / static_cast<double>(reps);
  double ss = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const double d = values[r] - mean;
    ss += d * d;
  }
  stddev = std::sqrt(ss / static_cast<double>(reps - 1));
  std_error = stddev / std::sqrt(static_cast<double>(reps));
}

bool clean_identifier(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

// Field checks shared by every experiment entry point; the n_grid shape rules
// live in ExperimentPlan::validate because the penalty sweep relaxes them.
void check_core(const ExperimentPlan& plan) {
  if (!plan.kernel) fail(ErrorCode::invalid_argument, "experiment plan requires a kernel");
  if (plan.target.coeffs.size() == 0) {
    fail(ErrorCode::invalid_argument, "experiment plan requires a target with at least one mode");
  }
  if (plan.p_list.empty()) fail(ErrorCode::invalid_argument, "p_list must not be empty");
  for (double p : plan.p_list) {
    if (!std::isfinite(p)) fail(ErrorCode::invalid_argument, "p_list entries must be finite");
  }
  if (plan.m_trunc == 0) fail(ErrorCode::invalid_argument, "mode truncation m must be positive");
  if (plan.m_trunc > plan.kernel->truncation()) {
    fail(ErrorCode::invalid_argument, "mode truncation m exceeds the kernel's mode count");
  }
  if (plan.m_trunc > static_cast<std::size_t>(plan.target.coeffs.size())) {
    fail(ErrorCode::invalid_argument, "mode truncation m exceeds the target's coefficient count");
  }
  if (plan.repetitions < 2) {
    fail(ErrorCode::invalid_argument, "at least 2 repetitions are needed for spread estimates");
  }
  if (!std::isfinite(plan.sigma) || plan.sigma < 0.0) {
    fail(ErrorCode::invalid_argument, "sigma must be finite and non-negative");
  }
  if (!std::isfinite(plan.slope_tol) || plan.slope_tol < 0.0) {
    fail(ErrorCode::invalid_argument, "slope_tol must be finite and non-negative");
  }
  if (!clean_identifier(plan.experiment_id)) {
    fail(ErrorCode::invalid_argument,
         "experiment_id must be non-empty and use only letters, digits, '.', '_', '-'");
  }
}

// 0 means auto: the flagship noiseless s = 0.5 L^2 series is held to 0.15,
// everything else to 0.3 (slopes carry log-factor and finite-sample wobble).
double resolve_slope_tol(const ExperimentPlan& plan, double p, bool noisy) {
  if (plan.slope_tol > 0.0) return plan.slope_tol;
  if (!noisy && plan.target.s == 0.5 && p == 0.0) return 0.15;
  return 0.3;
}

RateResult run_rate_experiment(const ExperimentPlan& plan, bool noisy) {
  plan.validate();
  if (!noisy) {
    if (plan.sigma != 0.0) {
      fail(ErrorCode::invalid_argument, "noiseless rate experiment requires sigma = 0");
    }
    if (plan.lambda.kind == LambdaPolicyKind::noisy_optimal) {
      fail(ErrorCode::invalid_argument,
           "noiseless rate experiment takes a fixed or pseudo-zero penalty policy");
    }
  } else if (plan.lambda.kind != LambdaPolicyKind::noisy_optimal) {
    fail(ErrorCode::invalid_argument, "noisy rate experiment requires the noise-optimal penalty policy");
  }

  const std::size_t n_count = plan.n_grid.size();
  const std::size_t reps = plan.repetitions;
  const std::size_t p_count = plan.p_list.size();

  std::vector<double> lambda_per_n(n_count);
  for (std::size_t i = 0; i < n_count; ++i) lambda_per_n[i] = plan.lambda.lambda_for(plan.n_grid[i]);

  std::vector<double> errors(p_count * n_count * reps);
  std::vector<unsigned char> warn_flags(errors.size(), 0);
  std::vector<std::vector<double>> cell_blocks(errors.size());

  parallel_for(n_count * reps, [&](std::size_t cell) {
    const std::size_t ni = cell / reps;
    const std::size_t rep = cell % reps;
    const std::uint64_t seed = mix_seed(plan.base_seed, plan.n_grid[ni], rep);
    const Dataset data =
        sample_dataset(plan.target, plan.kernel, plan.n_grid[ni], plan.density, plan.sigma, seed);
    const KrrSolution sol = solve_krr(data, plan.kernel, lambda_per_n[ni]);
    const SpectralResiduals res(sol, plan.target, plan.m_trunc);
    for (std::size_t pi = 0; pi < p_count; ++pi) {
      const HpError e = res.error_sq(plan.p_list[pi]);
      const std::size_t slot = (pi * n_count + ni) * reps + rep;
      errors[slot] = e.value;
      warn_flags[slot] = e.truncation_warning ? 1 : 0;
      cell_blocks[slot] = res.complete_block_sums(plan.p_list[pi]);
    }
  });

  // One solve's block sums swing with the point draw, so the non-convergence
  // verdict for each (p, n) is taken on the blocks averaged over repetitions.
  for (std::size_t pi = 0; pi < p_count; ++pi) {
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      std::vector<double> mean_blocks(cell_blocks[(pi * n_count + ni) * reps].size(), 0.0);
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const std::vector<double>& blocks = cell_blocks[(pi * n_count + ni) * reps + rep];
        for (std::size_t k = 0; k < mean_blocks.size(); ++k) mean_blocks[k] += blocks[k];
      }
      for (double& b : mean_blocks) b /= static_cast<double>(reps);
      if (divergent_tail_growth(mean_blocks, plan.n_grid[ni])) {
        fail(ErrorCode::domain, "error series diverges at p = " + fmtg(plan.p_list[pi]) +
                                    " with m = " + std::to_string(plan.m_trunc) +
                                    " (n = " + std::to_string(plan.n_grid[ni]) + ")");
      }
    }
  }

  RateResult out;
  out.experiment_id = plan.experiment_id;
  out.kind = noisy ? "noisy-rates" : "noiseless-rates";
  out.kernel_name = kernel_display_name(*plan.kernel);
  out.s = plan.target.s;
  out.sigma = plan.sigma;
  out.repetitions = reps;
  out.m_trunc = plan.m_trunc;
  out.lambda_policy = plan.lambda.describe();
  out.n_grid = plan.n_grid;
  out.lambda_per_n = lambda_per_n;

  std::vector<double> xs(n_count);
  for (std::size_t i = 0; i < n_count; ++i) xs[i] = static_cast<double>(plan.n_grid[i]);
  const std::optional<double> beta = plan.kernel->spec().decay_exponent();

  out.series.reserve(p_count);
  for (std::size_t pi = 0; pi < p_count; ++pi) {
    RateSeries series;
    series.p = plan.p_list[pi];
    series.mean.resize(n_count);
    series.stddev.resize(n_count);
    series.std_error.resize(n_count);
    bool warned = false;
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      summarize(&errors[(pi * n_count + ni) * reps], reps, series.mean[ni], series.stddev[ni],
                series.std_error[ni]);
      for (std::size_t rep = 0; rep < reps; ++rep) {
        warned = warned || warn_flags[(pi * n_count + ni) * reps + rep] != 0;
      }
    }
    series.fit = fit_log_slope(xs, series.mean);
    double theory = std::numeric_limits<double>::quiet_NaN();
    if (beta) {
      theory = theoretical_rate_slope(*beta, plan.target.s, series.p, noisy);
      // Without noise the decaying penalty leaves only the bias term
      // lambda^{s-p}, which steepens the exponent by the factor min(s, 2).
      if (noisy && plan.sigma == 0.0 && !std::isnan(theory)) theory *= std::min(plan.target.s, 2.0);
    }
    series.theory_slope = theory;
    series.slope_tol = resolve_slope_tol(plan, series.p, noisy);
    series.slope_pass = std::isnan(theory) || std::abs(series.fit.slope - theory) <= series.slope_tol;
    series.truncation_warning = warned;
    out.passed = out.passed && series.slope_pass;
    out.series.push_back(std::move(series));
  }

  out.rows.reserve(errors.size());
  for (std::size_t pi = 0; pi < p_count; ++pi) {
    for (std::size_t ni = 0; ni < n_count; ++ni) {
      for (std::size_t rep = 0; rep < reps; ++rep) {
        CsvRow row;
        row.experiment_id = plan.experiment_id;
        row.kernel = out.kernel_name;
        row.s = plan.target.s;
        row.p = plan.p_list[pi];
        row.n = plan.n_grid[ni];
        row.lambda = lambda_per_n[ni];
        row.sigma = plan.sigma;
        row.rep = rep;
        row.error_sq = errors[(pi * n_count + ni) * reps + rep];
        row.m_trunc = plan.m_trunc;
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

double parse_csv_double(const std::string& field, const std::string& path, std::size_t line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    fail(ErrorCode::parse, path + ":" + std::to_string(line) + ": expected a number, got '" + field + "'");
  }
  return v;
}

std::size_t parse_csv_size(const std::string& field, const std::string& path, std::size_t line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') {
    fail(ErrorCode::parse,
         path + ":" + std::to_string(line) + ": expected a non-negative integer, got '" + field + "'");
  }
  return static_cast<std::size_t>(v);
}

nlohmann::json series_json(const RateResult& result, const RateSeries& series) {
  return nlohmann::json{{"p", series.p},
                        {"n", result.n_grid},
                        {"mean", series.mean},
                        {"std", series.stddev},
                        {"std_error", series.std_error},
                        {"slope", series.fit.slope},
                        {"intercept", series.fit.intercept},
                        {"slope_std_error", series.fit.std_error},
                        {"ci_lo", series.fit.ci_lo},
                        {"ci_hi", series.fit.ci_hi},
                        {"theory_slope", series.theory_slope},
                        {"slope_tol", series.slope_tol},
                        {"pass", series.slope_pass},
                        {"truncation_warning", series.truncation_warning}};
}

}  // namespace

LambdaPolicy LambdaPolicy::fixed(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    fail(ErrorCode::invalid_argument, "fixed penalty must be finite and non-negative");
  }
  LambdaPolicy policy;
  policy.kind = LambdaPolicyKind::fixed;
  policy.value = value;
  return policy;
}

LambdaPolicy LambdaPolicy::pseudo_zero() {
  LambdaPolicy policy;
  policy.kind = LambdaPolicyKind::pseudo_zero;
  return policy;
}

LambdaPolicy LambdaPolicy::noisy_optimal(double c, double s_eff, double beta) {
  if (!std::isfinite(c) || c <= 0.0) {
    fail(ErrorCode::invalid_argument, "noise-optimal penalty prefactor c must be finite and positive");
  }
  if (std::isnan(s_eff) || s_eff <= 0.0) {
    fail(ErrorCode::invalid_argument, "noise-optimal penalty smoothness must be positive");
  }
  if (!std::isfinite(beta) || beta <= 1.0) {
    fail(ErrorCode::invalid_argument, "noise-optimal penalty decay beta must exceed 1");
  }
  LambdaPolicy policy;
  policy.kind = LambdaPolicyKind::noisy_optimal;
  policy.c = c;
  policy.s_eff = s_eff;
  policy.beta = beta;
  return policy;
}

double LambdaPolicy::lambda_for(std::size_t n) const {
  if (n == 0) fail(ErrorCode::invalid_argument, "penalty schedule needs a positive sample size");
  switch (kind) {
    case LambdaPolicyKind::fixed:
      return value;
    case LambdaPolicyKind::pseudo_zero:
      return 0.0;
    case LambdaPolicyKind::noisy_optimal: {
      const double se = std::min(s_eff, 2.0);
      return c * std::pow(static_cast<double>(n), -se / (se * beta + 1.0));
    }
  }
  fail(ErrorCode::internal, "unhandled penalty policy kind");
}

std::string LambdaPolicy::describe() const {
  switch (kind) {
    case LambdaPolicyKind::fixed:
      return "fixed(" + fmtg(value) + ")";
    case LambdaPolicyKind::pseudo_zero:
      return "pseudo-zero";
    case LambdaPolicyKind::noisy_optimal:
      return "noisy-optimal(c=" + fmtg(c) + ", s_eff=" + fmtg(std::min(s_eff, 2.0)) +
             ", beta=" + fmtg(beta) + ")";
  }
  fail(ErrorCode::internal, "unhandled penalty policy kind");
}

void ExperimentPlan::validate() const {
  check_core(*this);
  if (n_grid.size() < 5) {
    fail(ErrorCode::invalid_argument, "n_grid needs at least 5 sizes for a slope fit");
  }
  if (n_grid.front() == 0) fail(ErrorCode::invalid_argument, "sample sizes must be positive");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) {
      fail(ErrorCode::invalid_argument, "n_grid must be strictly increasing");
    }
  }
  const double decades =
      std::log10(static_cast<double>(n_grid.back()) / static_cast<double>(n_grid.front()));
  if (static_cast<double>(n_grid.size() - 1) < 2.0 * decades) {
    fail(ErrorCode::invalid_argument, "n_grid needs at least 2 sizes per decade");
  }
}

std::vector<std::size_t> default_n_grid() { return {32, 64, 128, 256, 512, 1024}; }

double theoretical_rate_slope(double beta, double s, double p, bool noisy) {
  if (!std::isfinite(beta) || std::isnan(s)) return std::numeric_limits<double>::quiet_NaN();
  const double se = std::min(s, 2.0);
  if (!noisy) return -beta * (se - p);
  return -beta * (se - p) / (se * beta + 1.0);
}

RateResult noiseless_rate_experiment(const ExperimentPlan& plan) {
  return run_rate_experiment(plan, false);
}

RateResult noisy_rate_experiment(const ExperimentPlan& plan) { return run_rate_experiment(plan, true); }

LambdaSweepResult lambda_sweep(const ExperimentPlan& plan, std::vector<double> lambda_grid) {
  check_core(plan);
  if (plan.n_grid.size() != 1) {
    fail(ErrorCode::invalid_argument, "penalty sweep runs at a single sample size");
  }
  if (plan.n_grid.front() == 0) fail(ErrorCode::invalid_argument, "sample sizes must be positive");
  if (plan.sigma != 0.0) fail(ErrorCode::invalid_argument, "penalty sweep requires sigma = 0");
  if (lambda_grid.empty()) fail(ErrorCode::invalid_argument, "penalty grid must not be empty");
  for (double v : lambda_grid) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCode::invalid_argument, "penalty grid entries must be finite and non-negative");
    }
  }
  std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<double>());

  const std::size_t n = plan.n_grid.front();
  const std::size_t reps = plan.repetitions;
  const std::size_t l_count = lambda_grid.size();
  const std::size_t p_count = plan.p_list.size();

  // Every penalty sees the same repetitions: datasets are drawn once per rep,
  // so adjacent mean errors differ only through the penalty.
  std::vector<Dataset> datasets(reps);
  parallel_for(reps, [&](std::size_t rep) {
    datasets[rep] =
        sample_dataset(plan.target, plan.kernel, n, plan.density, 0.0, mix_seed(plan.base_seed, n, rep));
  });

  std::vector<double> errors(p_count * l_count * reps);
  parallel_for(l_count * reps, [&](std::size_t cell) {
    const std::size_t li = cell / reps;
    const std::size_t rep = cell % reps;
    const KrrSolution sol = solve_krr(datasets[rep], plan.kernel, lambda_grid[li]);
    const SpectralResiduals res(sol, plan.target, plan.m_trunc);
    for (std::size_t pi = 0; pi < p_count; ++pi) {
      errors[(pi * l_count + li) * reps + rep] = res.error_sq(plan.p_list[pi]).value;
    }
  });

  LambdaSweepResult out;
  out.experiment_id = plan.experiment_id;
  out.kernel_name = kernel_display_name(*plan.kernel);
  out.s = plan.target.s;
  out.sigma = plan.sigma;
  out.n = n;
  out.repetitions = reps;
  out.m_trunc = plan.m_trunc;
  out.lambda_grid = lambda_grid;
  out.p_list = plan.p_list;
  out.mean.assign(p_count, std::vector<double>(l_count));
  out.stddev.assign(p_count, std::vector<double>(l_count));
  out.std_error.assign(p_count, std::vector<double>(l_count));

  for (std::size_t pi = 0; pi < p_count; ++pi) {
    for (std::size_t li = 0; li < l_count; ++li) {
      summarize(&errors[(pi * l_count + li) * reps], reps, out.mean[pi][li], out.stddev[pi][li],
                out.std_error[pi][li]);
    }
    // The grid is descending, so index k+1 is the smaller penalty; an error
    // rise past twice the larger spread counts as a monotonicity violation.
    for (std::size_t li = 0; li + 1 < l_count; ++li) {
      const double rise = out.mean[pi][li + 1] - out.mean[pi][li];
      if (rise > 2.0 * std::max(out.stddev[pi][li], out.stddev[pi][li + 1])) ++out.violations;
    }
  }

  out.rows.reserve(errors.size());
  for (std::size_t pi = 0; pi < p_count; ++pi) {
    for (std::size_t li = 0; li < l_count; ++li) {
      for (std::size_t rep = 0; rep < reps; ++rep) {
        CsvRow row;
        row.experiment_id = plan.experiment_id;
        row.kernel = out.kernel_name;
        row.s = plan.target.s;
        row.p = plan.p_list[pi];
        row.n = n;
        row.lambda = lambda_grid[li];
        row.sigma = plan.sigma;
        row.rep = rep;
        row.error_sq = errors[(pi * l_count + li) * reps + rep];
        row.m_trunc = plan.m_trunc;
        out.rows.push_back(std::move(row));
      }
    }
  }
  out.passed = out.violations == 0;
  return out;
}

SaturationResult saturation_scan(const ExperimentPlan& base, const std::vector<double>& s_list) {
  if (base.p_list.size() != 1) {
    fail(ErrorCode::invalid_argument, "saturation scan fixes a single smoothness order p");
  }
  if (s_list.empty()) fail(ErrorCode::invalid_argument, "saturation scan needs at least one s");
  for (double s : s_list) {
    if (!std::isfinite(s) || s <= 0.0) {
      fail(ErrorCode::invalid_argument, "saturation scan smoothness values must be finite and positive");
    }
  }
  if (!base.kernel) fail(ErrorCode::invalid_argument, "experiment plan requires a kernel");

  SaturationResult out;
  out.experiment_id = base.experiment_id;
  out.kernel_name = kernel_display_name(*base.kernel);
  out.p = base.p_list.front();
  const std::size_t target_modes = base.kernel->truncation();
  const std::optional<double> beta = base.kernel->spec().decay_exponent();

  for (double s : s_list) {
    ExperimentPlan plan = base;
    plan.target = make_power_law_target(s, target_modes);
    const RateResult run = noiseless_rate_experiment(plan);
    SaturationRow row;
    row.s = s;
    row.fit = run.series.front().fit;
    row.theory_slope = beta ? theoretical_rate_slope(*beta, s, out.p, false)
                            : std::numeric_limits<double>::quiet_NaN();
    row.saturated = s >= 2.0;
    out.table.push_back(row);
    out.rows.insert(out.rows.end(), run.rows.begin(), run.rows.end());
  }

  const double tol = base.slope_tol > 0.0 ? base.slope_tol : 0.3;
  const SaturationRow* s2_row = nullptr;
  for (const SaturationRow& row : out.table) {
    if (row.s == 2.0) s2_row = &row;
  }
  for (SaturationRow& row : out.table) {
    row.matches_theory =
        std::isnan(row.theory_slope) || std::abs(row.fit.slope - row.theory_slope) <= tol;
    if (row.saturated && s2_row != nullptr) {
      row.ci_overlap_s2 = row.fit.ci_lo <= s2_row->fit.ci_hi && s2_row->fit.ci_lo <= row.fit.ci_hi;
    }
    // Saturated rows are judged by agreement with the s = 2 slope when that
    // row exists, otherwise by the clamped theory slope; the rest by theory.
    const bool row_pass = row.saturated && s2_row != nullptr ? row.ci_overlap_s2 : row.matches_theory;
    out.passed = out.passed && row_pass;
  }
  return out;
}

PThresholdResult p_threshold_scan(const ExperimentPlan& base, std::size_t n_divergent,
                                  std::size_t m_base) {
  check_core(base);
  if (base.sigma != 0.0) {
    fail(ErrorCode::invalid_argument, "solution smoothness scan requires sigma = 0");
  }
  if (base.lambda.kind == LambdaPolicyKind::noisy_optimal) {
    fail(ErrorCode::invalid_argument,
         "solution smoothness scan takes a fixed or pseudo-zero penalty policy");
  }
  const std::optional<double> beta = base.kernel->spec().decay_exponent();
  if (!beta) {
    fail(ErrorCode::domain, "solution smoothness threshold needs a polynomial spectral decay");
  }
  if (n_divergent == 0) fail(ErrorCode::invalid_argument, "divergence probe needs a positive sample size");
  if (m_base == 0) fail(ErrorCode::invalid_argument, "divergence probe needs a positive base truncation");
  if (2 * m_base > base.kernel->truncation()) {
    fail(ErrorCode::invalid_argument, "mode doubling exceeds the kernel's mode count");
  }
  if (2 * m_base > static_cast<std::size_t>(base.target.coeffs.size())) {
    fail(ErrorCode::invalid_argument, "mode doubling exceeds the target's coefficient count");
  }

  PThresholdResult out;
  out.experiment_id = base.experiment_id;
  out.kernel_name = kernel_display_name(*base.kernel);
  out.p0 = 2.0 - 1.0 / *beta;
  out.n_divergent = n_divergent;
  out.m_base = m_base;

  const std::size_t reps = base.repetitions;
  const double lambda = base.lambda.lambda_for(n_divergent);

  for (double p : base.p_list) {
    PThresholdRow row;
    row.p = p;
    if (p < out.p0) {
      ExperimentPlan plan = base;
      plan.p_list = {p};
      const RateResult run = noiseless_rate_experiment(plan);
      row.fit = run.series.front().fit;
      row.theory_slope = run.series.front().theory_slope;
      row.slope_pass = run.series.front().slope_pass;
      out.rows.insert(out.rows.end(), run.rows.begin(), run.rows.end());
      out.passed = out.passed && row.slope_pass;
    } else {
      // At or past the threshold the truncated series has no limit to fit;
      // the probe re-reads the same solves at m and 2m and flags growth.
      row.divergent_branch = true;
      std::vector<double> at_m(reps);
      std::vector<double> at_2m(reps);
      parallel_for(reps, [&](std::size_t rep) {
        const std::uint64_t seed = mix_seed(base.base_seed, n_divergent, rep);
        const Dataset data =
            sample_dataset(base.target, base.kernel, n_divergent, base.density, 0.0, seed);
        const KrrSolution sol = solve_krr(data, base.kernel, lambda);
        const SpectralResiduals res_m(sol, base.target, m_base);
        const SpectralResiduals res_2m(sol, base.target, 2 * m_base);
        at_m[rep] = res_m.error_sq(p).value;
        at_2m[rep] = res_2m.error_sq(p).value;
      });
      double sum_m = 0.0;
      double sum_2m = 0.0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        sum_m += at_m[rep];
        sum_2m += at_2m[rep];
      }
      row.error_m = sum_m / static_cast<double>(reps);
      row.error_2m = sum_2m / static_cast<double>(reps);
      row.growth_ratio = row.error_2m / row.error_m;
      row.divergence_flag = row.growth_ratio > 1.2;
      for (std::size_t doubled = 0; doubled < 2; ++doubled) {
        const std::size_t m = doubled == 0 ? m_base : 2 * m_base;
        for (std::size_t rep = 0; rep < reps; ++rep) {
          CsvRow csv;
          csv.experiment_id = base.experiment_id;
          csv.kernel = out.kernel_name;
          csv.s = base.target.s;
          csv.p = p;
          csv.n = n_divergent;
          csv.lambda = lambda;
          csv.sigma = 0.0;
          csv.rep = rep;
          csv.error_sq = doubled == 0 ? at_m[rep] : at_2m[rep];
          csv.m_trunc = m;
          out.rows.push_back(std::move(csv));
        }
      }
      // Strictly past the threshold growth is required; at the threshold
      // itself the ratio hovers near 1 and the row is informational.
      if (p > out.p0) out.passed = out.passed && row.divergence_flag;
    }
    out.table.push_back(std::move(row));
  }
  return out;
}

DirichletReport dirichlet_psd_check_points(std::size_t m, const Eigen::VectorXd& x) {
  if (m % 2 != 0) fail(ErrorCode::domain, "Dirichlet degree m must be even");
  if (x.size() == 0) fail(ErrorCode::invalid_argument, "Dirichlet check needs at least one point");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) fail(ErrorCode::invalid_argument, "Dirichlet points must be finite");
  }
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double t = x[a] - x[b];
      double sum = 1.0;
      for (std::size_t j = 1; j <= m; ++j) sum += 2.0 * std::cos(two_pi * static_cast<double>(j) * t);
      h(a, b) = sum;
      h(b, a) = sum;
    }
  }
  // The claim under test: the Gram matrix dominates its rank-one mean part,
  // H >= ((m+1)/n) 1 1^T, up to eigensolver round-off scaled by m+1.
  h.array() -= static_cast<double>(m + 1) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);

  DirichletReport report;
  report.m = m;
  report.n = static_cast<std::size_t>(n);
  report.min_eigenvalue = eig.eigenvalues().minCoeff();
  report.tolerance = 1e-6 * static_cast<double>(m + 1);
  report.passed = report.min_eigenvalue >= -report.tolerance;
  return report;
}

DirichletReport dirichlet_psd_check(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::invalid_argument, "Dirichlet check needs a positive sample size");
  Rng rng(seed);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(i)] = rng.uniform();
  DirichletReport report = dirichlet_psd_check_points(m, x);
  report.seed = seed;
  return report;
}

void write_csv(const std::vector<CsvRow>& rows, const std::string& path) {
  std::string content = kCsvHeader;
  content.push_back('\n');
  for (const CsvRow& row : rows) {
    if (!clean_identifier(row.experiment_id)) {
      fail(ErrorCode::invalid_argument, "CSV experiment_id must be a clean identifier");
    }
    if (row.kernel.find(',') != std::string::npos || row.kernel.find('\n') != std::string::npos) {
      fail(ErrorCode::invalid_argument, "CSV kernel name must not contain commas or newlines");
    }
    content += row.experiment_id;
    content.push_back(',');
    content += row.kernel;
    content.push_back(',');
    content += fmt17(row.s);
    content.push_back(',');
    content += fmt17(row.p);
    content.push_back(',');
    content += std::to_string(row.n);
    content.push_back(',');
    content += fmt17(row.lambda);
    content.push_back(',');
    content += fmt17(row.sigma);
    content.push_back(',');
    content += std::to_string(row.rep);
    content.push_back(',');
    content += fmt17(row.error_sq);
    content.push_back(',');
    content += std::to_string(row.m_trunc);
    content.push_back('\n');
  }
  write_text_file(content, path);
}

std::vector<CsvRow> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse, path + ": missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) fail(ErrorCode::parse, path + ": unexpected CSV header '" + line + "'");

  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 10) {
      fail(ErrorCode::parse,
           path + ":" + std::to_string(lineno) + ": expected 10 fields, got " +
               std::to_string(fields.size()));
    }
    CsvRow row;
    row.experiment_id = fields[0];
    row.kernel = fields[1];
    row.s = parse_csv_double(fields[2], path, lineno);
    row.p = parse_csv_double(fields[3], path, lineno);
    row.n = parse_csv_size(fields[4], path, lineno);
    row.lambda = parse_csv_double(fields[5], path, lineno);
    row.sigma = parse_csv_double(fields[6], path, lineno);
    row.rep = parse_csv_size(fields[7], path, lineno);
    row.error_sq = parse_csv_double(fields[8], path, lineno);
    row.m_trunc = parse_csv_size(fields[9], path, lineno);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string json_summary(const RateResult& result) {
  nlohmann::json j;
  j["experiment"] = result.experiment_id;
  j["kind"] = result.kind;
  j["kernel"] = result.kernel_name;
  j["parameters"] = {{"s", result.s},
                     {"sigma", result.sigma},
                     {"repetitions", result.repetitions},
                     {"m_trunc", result.m_trunc},
                     {"lambda_policy", result.lambda_policy},
                     {"n_grid", result.n_grid},
                     {"lambda_per_n", result.lambda_per_n}};
  j["series"] = nlohmann::json::array();
  for (const RateSeries& series : result.series) j["series"].push_back(series_json(result, series));
  j["passed"] = result.passed;
  return j.dump(2) + "\n";
}

std::string json_summary(const LambdaSweepResult& result) {
  nlohmann::json j;
  j["experiment"] = result.experiment_id;
  j["kind"] = "lambda-sweep";
  j["kernel"] = result.kernel_name;
  j["parameters"] = {{"s", result.s},
                     {"sigma", result.sigma},
                     {"n", result.n},
                     {"repetitions", result.repetitions},
                     {"m_trunc", result.m_trunc},
                     {"lambda_grid", result.lambda_grid},
                     {"p_list", result.p_list}};
  j["series"] = nlohmann::json::array();
  for (std::size_t pi = 0; pi < result.p_list.size(); ++pi) {
    j["series"].push_back({{"p", result.p_list[pi]},
                           {"lambda", result.lambda_grid},
                           {"mean", result.mean[pi]},
                           {"std", result.stddev[pi]},
                           {"std_error", result.std_error[pi]}});
  }
  j["checks"] = {{"violations", result.violations}};
  j["passed"] = result.passed;
  return j.dump(2) + "\n";
}

std::string json_summary(const SaturationResult& result) {
  nlohmann::json j;
  j["experiment"] = result.experiment_id;
  j["kind"] = "saturation";
  j["kernel"] = result.kernel_name;
  j["parameters"] = {{"p", result.p}};
  j["table"] = nlohmann::json::array();
  for (const SaturationRow& row : result.table) {
    j["table"].push_back({{"s", row.s},
                          {"slope", row.fit.slope},
                          {"ci_lo", row.fit.ci_lo},
                          {"ci_hi", row.fit.ci_hi},
                          {"theory_slope", row.theory_slope},
                          {"saturated", row.saturated},
                          {"ci_overlap_s2", row.ci_overlap_s2},
                          {"matches_theory", row.matches_theory}});
  }
  j["passed"] = result.passed;
  return j.dump(2) + "\n";
}

std::string json_summary(const PThresholdResult& result) {
  nlohmann::json j;
  j["experiment"] = result.experiment_id;
  j["kind"] = "p-threshold";
  j["kernel"] = result.kernel_name;
  j["parameters"] = {
      {"p0", result.p0}, {"n_divergent", result.n_divergent}, {"m_base", result.m_base}};
  j["table"] = nlohmann::json::array();
  for (const PThresholdRow& row : result.table) {
    nlohmann::json entry = {{"p", row.p}, {"branch", row.divergent_branch ? "doubling" : "slope"}};
    if (row.divergent_branch) {
      entry["error_m"] = row.error_m;
      entry["error_2m"] = row.error_2m;
      entry["growth_ratio"] = row.growth_ratio;
      entry["divergence_flag"] = row.divergence_flag;
    } else {
      entry["slope"] = row.fit.slope;
      entry["ci_lo"] = row.fit.ci_lo;
      entry["ci_hi"] = row.fit.ci_hi;
      entry["theory_slope"] = row.theory_slope;
      entry["pass"] = row.slope_pass;
    }
    j["table"].push_back(std::move(entry));
  }
  j["passed"] = result.passed;
  return j.dump(2) + "\n";
}

std::string json_summary(const DirichletReport& report) {
  nlohmann::json j;
  j["kind"] = "dirichlet-psd";
  j["parameters"] = {{"m", report.m}, {"n", report.n}, {"seed", report.seed}};
  j["checks"] = {{"min_eigenvalue", report.min_eigenvalue}, {"tolerance", report.tolerance}};
  j["passed"] = report.passed;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& content, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) fail(ErrorCode::io, "write failed for '" + path + "'");
}

void write_plot_data(const RateResult& result, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory '" + directory + "': " + ec.message());
  for (const RateSeries& series : result.series) {
    std::string content = "# n error_sq std\n";
    for (std::size_t ni = 0; ni < result.n_grid.size(); ++ni) {
      content += std::to_string(result.n_grid[ni]);
      content.push_back(' ');
      content += fmt17(series.mean[ni]);
      content.push_back(' ');
      content += fmt17(series.stddev[ni]);
      content.push_back('\n');
    }
    write_text_file(content,
                    directory + "/" + result.experiment_id + "_p" + fmtg(series.p) + ".dat");
  }
}

}  // namespace krr
