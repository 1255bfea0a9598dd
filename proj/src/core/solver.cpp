#include "core/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/parallel.hpp"

namespace krr {
namespace {

constexpr double kResidualTol = 1e-8;
constexpr double kPinvCutoffRel = 1e-12;

Eigen::VectorXd label_scale(const Dataset& data) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(data.q[i] > 0.0)) fail(ErrorCode::domain, "density values must be positive");
    s[i] = std::sqrt(static_cast<double>(n) * data.q[i]);
  }
  return s;
}

struct SystemSolve {
  Eigen::MatrixXd coeffs;
  Eigen::VectorXd residual_rel;
  Eigen::Index rank = -1;
  bool used_fallback = false;
};

Eigen::VectorXd relative_residuals(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& Y) {
  Eigen::VectorXd out(Y.cols());
  const Eigen::MatrixXd R = A * B - Y;
  for (Eigen::Index c = 0; c < Y.cols(); ++c) {
    const double ynorm = Y.col(c).norm();
    out[c] = ynorm > 0.0 ? R.col(c).norm() / ynorm : R.col(c).norm();
  }
  return out;
}

// Symmetric pseudoinverse applied to Y: eigenpairs with |d_k| below
// cutoff_rel * max|d_k| are dropped, the rest inverted with their sign.
SystemSolve pinv_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Y) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) fail(ErrorCode::internal, "eigendecomposition failed");
  const Eigen::VectorXd& d = es.eigenvalues();
  const double top = d.cwiseAbs().maxCoeff();
  const double cutoff = kPinvCutoffRel * top;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d.size());
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (std::abs(d[k]) > cutoff) {
      inv[k] = 1.0 / d[k];
      ++rank;
    }
  }
  SystemSolve out;
  out.coeffs = es.eigenvectors() * inv.asDiagonal() * (es.eigenvectors().transpose() * Y);
  out.residual_rel = relative_residuals(A, out.coeffs, Y);
  out.rank = rank;
  return out;
}

// Solves (K + lambda I) B = Y. Positive lambda goes through LDLT with one
// refinement step; if the residual contract fails the shifted system is
// re-solved by eigendecomposition and the fallback is recorded.
SystemSolve solve_system(const Eigen::MatrixXd& K, double lambda, const Eigen::MatrixXd& Y) {
  if (lambda == 0.0) return pinv_solve(K, Y);
  Eigen::MatrixXd A = K;
  A.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  SystemSolve out;
  if (ldlt.info() == Eigen::Success) {
    out.coeffs = ldlt.solve(Y);
    out.coeffs -= ldlt.solve(A * out.coeffs - Y);
    out.residual_rel = relative_residuals(A, out.coeffs, Y);
    if (out.residual_rel.maxCoeff() <= kResidualTol) return out;
  }
  out = pinv_solve(A, Y);
  out.used_fallback = true;
  return out;
}

KrrSolution package_solution(const Dataset& data,
                             const std::shared_ptr<const SpectralKernel>& kernel, double lambda,
                             const Eigen::VectorXd& scale, const SystemSolve& sys,
                             Eigen::Index col) {
  KrrSolution sol;
  sol.kernel = kernel;
  sol.x = data.x;
  sol.q = data.q;
  sol.coeffs = sys.coeffs.col(col);
  sol.weighted = sol.coeffs.cwiseQuotient(scale);
  sol.lambda = lambda;
  sol.residual_rel = sys.residual_rel[col];
  sol.rank = sys.rank;
  sol.used_fallback = sys.used_fallback;
  return sol;
}

void check_solver_inputs(const Dataset& data, const std::shared_ptr<const SpectralKernel>& kernel,
                         double lambda) {
  if (kernel == nullptr) fail(ErrorCode::invalid_argument, "solver requires a kernel");
  if (data.n() == 0) fail(ErrorCode::invalid_argument, "solver requires a non-empty dataset");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::invalid_argument, "penalty must be finite and non-negative");
  }
}

}  // namespace

KrrSolution solve_krr(const Dataset& data, const std::shared_ptr<const SpectralKernel>& kernel,
                      double lambda) {
  check_solver_inputs(data, kernel, lambda);
  const Eigen::VectorXd scale = label_scale(data);
  const Eigen::MatrixXd K = kernel->gram(data.x, data.q);
  const Eigen::VectorXd yhat = data.labels().cwiseQuotient(scale);
  const SystemSolve sys = solve_system(K, lambda, yhat);
  return package_solution(data, kernel, lambda, scale, sys, 0);
}

BiasVariance bias_variance_split(const Dataset& data,
                                 const std::shared_ptr<const SpectralKernel>& kernel,
                                 double lambda) {
  check_solver_inputs(data, kernel, lambda);
  if (!data.has_noise_split) {
    fail(ErrorCode::domain, "bias/variance split needs a dataset with stored noise");
  }
  const Eigen::VectorXd scale = label_scale(data);
  const Eigen::MatrixXd K = kernel->gram(data.x, data.q);
  Eigen::MatrixXd Y(data.n(), 2);
  Y.col(0) = data.clean.cwiseQuotient(scale);
  Y.col(1) = data.noise.cwiseQuotient(scale);
  const SystemSolve sys = solve_system(K, lambda, Y);
  BiasVariance out;
  out.bias = package_solution(data, kernel, lambda, scale, sys, 0);
  out.variance = package_solution(data, kernel, lambda, scale, sys, 1);
  return out;
}

Eigen::VectorXd spectral_coefficients(const KrrSolution& sol, std::size_t m) {
  if (sol.kernel == nullptr) fail(ErrorCode::invalid_argument, "solution carries no kernel");
  if (m == 0 || m > sol.kernel->truncation()) {
    fail(ErrorCode::invalid_argument, "mode count must be positive and within the kernel truncation");
  }
  const Eigen::Index n = sol.n();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  constexpr std::size_t chunk = 4096;
  const std::size_t chunks = (m + chunk - 1) / chunk;
  // Each task owns one contiguous range of modes, so writes never overlap and
  // the result is independent of the schedule.
  parallel_for(chunks, [&](std::size_t ci) {
    const std::size_t j0 = 1 + ci * chunk;
    const std::size_t count = std::min(chunk, m - ci * chunk);
    std::vector<double> block(count);
    double* seg = u.data() + static_cast<Eigen::Index>(j0 - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      sol.kernel->eigenfunction_block(sol.x[i], j0, count, block.data());
      const double w = sol.weighted[i];
      for (std::size_t t = 0; t < count; ++t) seg[t] += w * block[t];
    }
  });
  return u;
}

Eigen::VectorXd predict(const KrrSolution& sol, const Eigen::VectorXd& xs) {
  if (sol.kernel == nullptr) fail(ErrorCode::invalid_argument, "solution carries no kernel");
  const Eigen::Index nt = xs.size();
  Eigen::VectorXd out(nt);
  if (nt == 0) return out;
  if (sol.kernel->has_closed_form()) {
    const SpectralKernel& kernel = *sol.kernel;
    parallel_for(static_cast<std::size_t>(nt), [&](std::size_t t) {
      const double xt = xs[static_cast<Eigen::Index>(t)];
      double acc = 0.0;
      for (Eigen::Index i = 0; i < sol.n(); ++i) acc += sol.weighted[i] * kernel.eval(sol.x[i], xt);
      out[static_cast<Eigen::Index>(t)] = acc;
    });
    return out;
  }
  // Truncated kernels: expand once into mode space, then evaluate the series.
  const std::size_t M = sol.kernel->truncation();
  const Eigen::VectorXd g = sol.kernel->eigenvalues().cwiseProduct(spectral_coefficients(sol, M));
  parallel_for(static_cast<std::size_t>(nt), [&](std::size_t t) {
    constexpr std::size_t chunk = 4096;
    std::vector<double> block(std::min(chunk, M));
    double acc = 0.0;
    for (std::size_t j0 = 1; j0 <= M; j0 += chunk) {
      const std::size_t count = std::min(chunk, M - j0 + 1);
      sol.kernel->eigenfunction_block(xs[static_cast<Eigen::Index>(t)], j0, count, block.data());
      for (std::size_t k = 0; k < count; ++k) {
        acc += g[static_cast<Eigen::Index>(j0 - 1 + k)] * block[k];
      }
    }
    out[static_cast<Eigen::Index>(t)] = acc;
  });
  return out;
}

SpectralResiduals::SpectralResiduals(const KrrSolution& sol, const TargetFunction& target,
                                     std::size_t m)
    : kernel_(sol.kernel), n_(static_cast<std::size_t>(sol.n())) {
  if (kernel_ == nullptr) fail(ErrorCode::invalid_argument, "solution carries no kernel");
  if (static_cast<Eigen::Index>(m) > target.coeffs.size()) {
    fail(ErrorCode::invalid_argument, "truncation exceeds the target coefficient count");
  }
  d_ = spectral_coefficients(sol, m);
  const Eigen::VectorXd& mu = kernel_->eigenvalues();
  for (Eigen::Index j = 0; j < d_.size(); ++j) d_[j] -= target.coeffs[j] / mu[j];
}

SpectralResiduals::SpectralResiduals(const KrrSolution& a, const KrrSolution& b, std::size_t m)
    : kernel_(a.kernel), n_(static_cast<std::size_t>(a.n())) {
  if (kernel_ == nullptr || b.kernel == nullptr) {
    fail(ErrorCode::invalid_argument, "solution carries no kernel");
  }
  if (kernel_ != b.kernel) {
    fail(ErrorCode::invalid_argument, "difference residuals need solutions sharing one kernel");
  }
  d_ = spectral_coefficients(a, m) - spectral_coefficients(b, m);
}

namespace {

// Dyadic blocks of mode indices: {1}, {2,3}, {4..7}, ...; the last block may
// be cut short by the truncation.
std::vector<double> dyadic_block_sums(const Eigen::VectorXd& d, const Eigen::VectorXd& mu,
                                      double p, bool* last_complete) {
  const Eigen::Index m = d.size();
  std::vector<double> blocks;
  double current = 0.0;
  Eigen::Index next_boundary = 2;
  for (Eigen::Index j = 1; j <= m; ++j) {
    if (j == next_boundary) {
      blocks.push_back(current);
      current = 0.0;
      next_boundary *= 2;
    }
    const double term = d[j - 1] * d[j - 1] * std::pow(mu[j - 1], 2.0 - p);
    current += term;
  }
  blocks.push_back(current);
  *last_complete = (m == next_boundary - 1);
  return blocks;
}

}  // namespace

bool divergent_tail_growth(const std::vector<double>& complete_blocks, std::size_t n) {
  if (n == 0) fail(ErrorCode::invalid_argument, "growth test needs a positive sample size");
  std::size_t first = 0;
  while (first < complete_blocks.size() && (std::size_t{1} << first) < 4 * n) ++first;
  const std::size_t count = complete_blocks.size() - first;
  if (count < 3) return false;
  std::vector<double> logs(count);
  for (std::size_t k = 0; k < count; ++k) {
    logs[k] = std::log2(std::max(complete_blocks[first + k], 1e-300));
  }
  std::vector<double> slopes;
  slopes.reserve(count * (count - 1) / 2);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) {
      slopes.push_back((logs[j] - logs[i]) / static_cast<double>(j - i));
    }
  }
  const std::size_t mid = slopes.size() / 2;
  std::nth_element(slopes.begin(), slopes.begin() + static_cast<std::ptrdiff_t>(mid),
                   slopes.end());
  double median = slopes[mid];
  if (slopes.size() % 2 == 0) {
    const double below = *std::max_element(slopes.begin(),
                                           slopes.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + below);
  }
  return median >= 0.15;
}

std::vector<double> SpectralResiduals::complete_block_sums(double p) const {
  if (!std::isfinite(p)) fail(ErrorCode::invalid_argument, "smoothness order must be finite");
  bool last_complete = false;
  std::vector<double> blocks = dyadic_block_sums(d_, kernel_->eigenvalues(), p, &last_complete);
  if (!last_complete) blocks.pop_back();
  return blocks;
}

HpError SpectralResiduals::error_sq(double p) const {
  if (!std::isfinite(p)) fail(ErrorCode::invalid_argument, "smoothness order must be finite");
  bool last_complete = false;
  const std::vector<double> blocks =
      dyadic_block_sums(d_, kernel_->eigenvalues(), p, &last_complete);
  HpError out;
  for (double b : blocks) out.value += b;
  out.last_block = blocks.back();
  out.last_block_fraction = out.value > 0.0 ? blocks.back() / out.value : 0.0;
  out.truncation_warning = out.last_block_fraction > 0.05;
  // Single-solve verdict; block sums of one solve swing with the point draw,
  // so experiment-level aborts re-run the test on repetition-averaged blocks.
  std::vector<double> complete = blocks;
  if (!last_complete) complete.pop_back();
  out.divergent = divergent_tail_growth(complete, n_);
  return out;
}

HpError hp_error(const KrrSolution& sol, const TargetFunction& target, double p, std::size_t m) {
  return SpectralResiduals(sol, target, m).error_sq(p);
}

MinNormLimitReport min_norm_limit_check(const Dataset& data,
                                        const std::shared_ptr<const SpectralKernel>& kernel,
                                        const std::vector<double>& lambdas, double p,
                                        std::size_t m) {
  if (lambdas.empty()) fail(ErrorCode::invalid_argument, "penalty sequence is empty");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] >= 0.0) || !std::isfinite(lambdas[k])) {
      fail(ErrorCode::invalid_argument, "penalties must be finite and non-negative");
    }
    if (k > 0 && !(lambdas[k] < lambdas[k - 1])) {
      fail(ErrorCode::invalid_argument, "penalty sequence must be strictly decreasing");
    }
  }
  const KrrSolution limit = solve_krr(data, kernel, 0.0);
  const Eigen::VectorXd u0 = spectral_coefficients(limit, m);
  const Eigen::VectorXd& mu = kernel->eigenvalues();
  Eigen::VectorXd weight(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    weight[static_cast<Eigen::Index>(j)] = std::pow(mu[static_cast<Eigen::Index>(j)], 2.0 - p);
  }
  MinNormLimitReport report;
  report.lambdas = lambdas;
  report.distances.reserve(lambdas.size());
  for (const double lambda : lambdas) {
    const KrrSolution sol = solve_krr(data, kernel, lambda);
    const Eigen::VectorXd du = spectral_coefficients(sol, m) - u0;
    report.distances.push_back(std::sqrt(du.cwiseAbs2().dot(weight)));
  }
  report.initial = report.distances.front();
  report.final_value = report.distances.back();
  report.converged = report.final_value <= 1e-6 * report.initial;
  report.decreasing = true;
  const double floor = 1e-6 * report.initial;
  for (std::size_t k = 0; k + 1 < report.distances.size(); ++k) {
    if (report.distances[k] <= floor) continue;
    if (report.distances[k + 1] > report.distances[k] * (1.0 + 1e-9)) {
      report.decreasing = false;
      break;
    }
  }
  report.passed = report.converged && report.decreasing;
  return report;
}

}  // namespace krr
