#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "core/dof.hpp"
#include "core/slope.hpp"
#include "core/spectrum.hpp"
#include "core/target.hpp"

namespace krr {

// Penalty schedule over the sample size: a fixed value, the pseudoinverse
// limit (lambda = 0), or the noise-optimal decay c * n^(-s/(s beta + 1)) with
// s clamped at the saturation point 2.
enum class LambdaPolicyKind { fixed, pseudo_zero, noisy_optimal };

struct LambdaPolicy {
  LambdaPolicyKind kind = LambdaPolicyKind::pseudo_zero;
  double value = 0.0;  // fixed penalty
  double c = 0.05;     // noisy-optimal prefactor
  double s_eff = 2.0;  // noisy-optimal smoothness
  double beta = 2.0;   // noisy-optimal spectral decay

  static LambdaPolicy fixed(double value);
  static LambdaPolicy pseudo_zero();
  static LambdaPolicy noisy_optimal(double c, double s_eff, double beta);

  double lambda_for(std::size_t n) const;
  std::string describe() const;
};

// One experiment: a kernel, a target, smoothness orders to report, a sample
// size grid with repetitions, a penalty policy, and a mode truncation for the
// error series. slope_tol = 0 picks the default tolerance (0.3, tightened to
// 0.15 for the noiseless s = 0.5, p = 0 flagship case).
struct ExperimentPlan {
  std::shared_ptr<const SpectralKernel> kernel;
  TargetFunction target;
  std::vector<double> p_list;
  std::vector<std::size_t> n_grid;
  LambdaPolicy lambda;
  double sigma = 0.0;
  std::size_t repetitions = 20;
  std::uint64_t base_seed = 1;
  std::size_t m_trunc = 10000;
  Density density = Density::uniform();
  std::string experiment_id = "rates";
  double slope_tol = 0.0;

  // Slope fits need >= 5 sizes, strictly increasing, at least 2 per decade.
  void validate() const;
};

std::vector<std::size_t> default_n_grid();

// Squared-error slope predicted by the convergence theory, with the target
// smoothness clamped at the saturation point 2. NaN when s carries no label.
double theoretical_rate_slope(double beta, double s, double p, bool noisy);

// One long-format output row; every experiment reduces to a list of these.
struct CsvRow {
  std::string experiment_id;
  std::string kernel;
  double s = std::numeric_limits<double>::quiet_NaN();
  double p = 0.0;
  std::size_t n = 0;
  double lambda = 0.0;
  double sigma = 0.0;
  std::size_t rep = 0;
  double error_sq = 0.0;
  std::size_t m_trunc = 0;
};

// Aggregates for one smoothness order p across the sample-size grid.
struct RateSeries {
  double p = 0.0;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> std_error;
  SlopeFit fit;
  double theory_slope = std::numeric_limits<double>::quiet_NaN();
  double slope_tol = 0.3;
  bool slope_pass = true;  // |fit - theory| <= slope_tol; true when theory is NaN
  bool truncation_warning = false;
};

struct RateResult {
  std::string experiment_id;
  std::string kind;  // "noiseless-rates" or "noisy-rates"
  std::string kernel_name;
  double s = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;
  std::size_t repetitions = 0;
  std::size_t m_trunc = 0;
  std::string lambda_policy;
  std::vector<std::size_t> n_grid;
  std::vector<double> lambda_per_n;
  std::vector<RateSeries> series;
  std::vector<CsvRow> rows;  // canonical order: p, then n, then rep
  bool passed = true;
};

// sigma = 0 with a fixed or pseudo-zero penalty; fitted slopes are compared
// against -beta (min(s,2) - p). A divergent error series in any cell aborts
// with the offending (p, m) named.
RateResult noiseless_rate_experiment(const ExperimentPlan& plan);

// Noise-optimal penalty schedule; theory slope -beta (min(s,2) - p) /
// (min(s,2) beta + 1). sigma = 0 is allowed and leaves the bias term only.
RateResult noisy_rate_experiment(const ExperimentPlan& plan);

// Mean errors on a penalty grid at one sample size, with repetitions sharing
// datasets across penalties. A monotonicity violation is an adjacent pair
// (descending penalties) whose mean error rises by more than twice the larger
// of the two standard deviations. Degenerate grids (single point, duplicates)
// are allowed and trivially report zero violations.
struct LambdaSweepResult {
  std::string experiment_id;
  std::string kernel_name;
  double s = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;
  std::size_t n = 0;
  std::size_t repetitions = 0;
  std::size_t m_trunc = 0;
  std::vector<double> lambda_grid;  // descending
  std::vector<double> p_list;
  std::vector<std::vector<double>> mean;       // [p_index][lambda_index]
  std::vector<std::vector<double>> stddev;     // [p_index][lambda_index]
  std::vector<std::vector<double>> std_error;  // [p_index][lambda_index]
  std::size_t violations = 0;
  std::vector<CsvRow> rows;
  bool passed = true;  // zero violations
};

LambdaSweepResult lambda_sweep(const ExperimentPlan& plan, std::vector<double> lambda_grid);

// Noiseless slope per target smoothness; rows at or past the saturation point
// must CI-overlap the s = 2 row, rows below it must match -beta (s - p).
struct SaturationRow {
  double s = 0.0;
  SlopeFit fit;
  double theory_slope = std::numeric_limits<double>::quiet_NaN();
  bool saturated = false;   // s >= 2
  bool ci_overlap_s2 = true;
  bool matches_theory = true;
};

struct SaturationResult {
  std::string experiment_id;
  std::string kernel_name;
  double p = 0.0;
  std::vector<SaturationRow> table;
  std::vector<CsvRow> rows;
  bool passed = true;
};

SaturationResult saturation_scan(const ExperimentPlan& base, const std::vector<double>& s_list);

// Behavior across the solution-smoothness threshold p0 = 2 - 1/beta: below it
// a convergent series with a slope fit, at or above it the truncated error is
// re-evaluated with the modes doubled and growth beyond 1.2 flags divergence.
struct PThresholdRow {
  double p = 0.0;
  bool divergent_branch = false;
  SlopeFit fit;  // convergent branch
  double theory_slope = std::numeric_limits<double>::quiet_NaN();
  bool slope_pass = true;
  double error_m = 0.0;   // divergent branch, mean over repetitions
  double error_2m = 0.0;
  double growth_ratio = 0.0;
  bool divergence_flag = false;
};

struct PThresholdResult {
  std::string experiment_id;
  std::string kernel_name;
  double p0 = 0.0;
  std::size_t n_divergent = 0;
  std::size_t m_base = 0;
  std::vector<PThresholdRow> table;
  std::vector<CsvRow> rows;
  bool passed = true;
};

PThresholdResult p_threshold_scan(const ExperimentPlan& base, std::size_t n_divergent,
                                  std::size_t m_base);

// Gram matrix of the degree-m Dirichlet kernel at uniform points on the torus,
// shifted by its one-vector lower bound (m+1)/n: the smallest eigenvalue of
// H - ((m+1)/n) 1 1^T must not dip below -1e-6 (m+1). m must be even.
struct DirichletReport {
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double min_eigenvalue = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

DirichletReport dirichlet_psd_check(std::size_t m, std::size_t n, std::uint64_t seed);
DirichletReport dirichlet_psd_check_points(std::size_t m, const Eigen::VectorXd& x);

// Long-format CSV with exactly the columns
// experiment_id,kernel,s,p,n,lambda,sigma,rep,error_sq,m_trunc.
void write_csv(const std::vector<CsvRow>& rows, const std::string& path);
std::vector<CsvRow> parse_csv(const std::string& path);

// JSON summaries (schema documented in docs/result-schema.json) and gnuplot
// style per-series plot data: rows of n, mean, std.
std::string json_summary(const RateResult& result);
std::string json_summary(const LambdaSweepResult& result);
std::string json_summary(const SaturationResult& result);
std::string json_summary(const PThresholdResult& result);
std::string json_summary(const DirichletReport& report);
void write_text_file(const std::string& content, const std::string& path);
void write_plot_data(const RateResult& result, const std::string& directory);

}  // namespace krr
