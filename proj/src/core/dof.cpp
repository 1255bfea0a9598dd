#include "core/dof.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/common.hpp"
#include "core/parallel.hpp"
#include "core/quadrature.hpp"
#include "core/slope.hpp"

namespace krr {

namespace {

// Memory cap for cached e_j(x_g)^2 tables: 2e7 doubles (160 MB).
constexpr std::size_t cache_budget = 20000000;

Eigen::VectorXd dof_weights(const SpectralKernel& kernel, double gamma, double lambda) {
  const Eigen::VectorXd& mu = kernel.eigenvalues();
  Eigen::VectorXd w(mu.size());
  if (gamma == 1.0) {
    for (Eigen::Index j = 0; j < mu.size(); ++j) w[j] = mu[j] / (mu[j] + lambda);
  } else {
    for (Eigen::Index j = 0; j < mu.size(); ++j) w[j] = std::pow(mu[j] / (mu[j] + lambda), gamma);
  }
  return w;
}

void check_gamma_lambda(double gamma, double lambda) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(ErrorCode::invalid_argument, "gamma must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::invalid_argument, "lambda must be non-negative");
}

}  // namespace

Density Density::uniform() { return Density(); }

Density Density::spectral(std::shared_ptr<const SpectralKernel> kernel, double gamma, double lambda) {
  if (kernel == nullptr) fail(ErrorCode::invalid_argument, "density requires a kernel");
  check_gamma_lambda(gamma, lambda);
  if (lambda == 0.0) {
    fail(ErrorCode::domain, "spectral density is undefined at lambda = 0 (all modes weigh one)");
  }
  Density d;
  d.kernel_ = std::move(kernel);
  d.gamma_ = gamma;
  d.lambda_ = lambda;
  d.weights_ = dof_weights(*d.kernel_, gamma, lambda);
  const double total = d.weights_.sum();
  if (!(total > 0.0)) fail(ErrorCode::internal, "degenerate spectral density normalization");
  d.weights_ /= total;
  return d;
}

Density Density::custom(std::function<double(double)> fn, std::string tag) {
  if (!fn) fail(ErrorCode::invalid_argument, "custom density requires a function");
  Density d;
  d.fn_ = std::move(fn);
  d.custom_tag_ = std::move(tag);
  return d;
}

double Density::operator()(double x) const {
  if (is_uniform()) return 1.0;
  if (fn_) return fn_(x);
  Eigen::VectorXd xs(1);
  xs << x;
  return evaluate(xs)[0];
}

Eigen::VectorXd Density::evaluate(const Eigen::VectorXd& xs) const {
  if (is_uniform()) return Eigen::VectorXd::Ones(xs.size());
  if (fn_) {
    Eigen::VectorXd out(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = fn_(xs[i]);
    return out;
  }
  const std::size_t M = kernel_->truncation();
  Eigen::VectorXd out(xs.size());
  std::vector<double> scratch(M);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    kernel_->eigenfunctions(xs[i], scratch.data());
    double acc = 0.0;
    for (std::size_t j = 0; j < M; ++j) acc += weights_[static_cast<Eigen::Index>(j)] * scratch[j] * scratch[j];
    out[i] = acc;
  }
  return out;
}

double Density::mass(std::size_t panels) const {
  if (is_uniform()) return 1.0;
  return integrate([this](double x) { return (*this)(x); }, 0.0, 1.0, panels);
}

std::string Density::tag() const {
  if (is_uniform()) return "uniform";
  if (fn_) return custom_tag_.empty() ? "custom" : custom_tag_;
  std::ostringstream os;
  os << "nu(gamma=" << gamma_ << ",lambda=" << lambda_ << ")";
  return os.str();
}

std::vector<double> default_sup_grid(std::size_t size) {
  if (size == 0) fail(ErrorCode::invalid_argument, "sup grid must be non-empty");
  std::vector<double> g(size);
  for (std::size_t i = 0; i < size; ++i) {
    g[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(size);
  }
  return g;
}

DofQuery::DofQuery(std::shared_ptr<const SpectralKernel> kernel_, double gamma_, double lambda_,
                   Density density_, std::vector<double> sup_grid_)
    : kernel(std::move(kernel_)),
      gamma(gamma_),
      lambda(lambda_),
      density(std::move(density_)),
      sup_grid(std::move(sup_grid_)) {
  if (kernel == nullptr) fail(ErrorCode::invalid_argument, "query requires a kernel");
  check_gamma_lambda(gamma, lambda);
  if (sup_grid.empty()) sup_grid = default_sup_grid();
  for (double x : sup_grid) {
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::domain, "sup grid points must lie in [0, 1]");
  }
  divergence_warning = kernel->spec().spectral_sum_diverges(gamma);
}

double n_gamma(const DofQuery& q) {
  return dof_weights(*q.kernel, q.gamma, q.lambda).sum();
}

SupDofEvaluator::SupDofEvaluator(std::shared_ptr<const SpectralKernel> kernel, double gamma,
                                 Density density, std::vector<double> sup_grid)
    : kernel_(std::move(kernel)), gamma_(gamma), density_(std::move(density)), grid_(std::move(sup_grid)) {
  if (kernel_ == nullptr) fail(ErrorCode::invalid_argument, "evaluator requires a kernel");
  if (grid_.empty()) grid_ = default_sup_grid();
  const std::size_t G = grid_.size();
  const std::size_t M = kernel_->truncation();
  Eigen::VectorXd gx = Eigen::Map<const Eigen::VectorXd>(grid_.data(), static_cast<Eigen::Index>(G));
  const Eigen::VectorXd qv = density_.evaluate(gx);
  inv_q_.resize(static_cast<Eigen::Index>(G));
  for (std::size_t g = 0; g < G; ++g) {
    if (!(qv[static_cast<Eigen::Index>(g)] > 0.0)) {
      fail(ErrorCode::domain, "sampling density vanishes on the sup grid");
    }
    inv_q_[static_cast<Eigen::Index>(g)] = 1.0 / qv[static_cast<Eigen::Index>(g)];
  }
  if (G * M <= cache_budget) {
    esq_.resize(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(M));
    for (std::size_t g = 0; g < G; ++g) {
      double* row = esq_.row(static_cast<Eigen::Index>(g)).data();
      kernel_->eigenfunctions(grid_[g], row);
      for (std::size_t j = 0; j < M; ++j) row[j] *= row[j];
    }
  }
}

double SupDofEvaluator::operator()(double lambda) const {
  check_gamma_lambda(gamma_, lambda);
  const Eigen::VectorXd w = dof_weights(*kernel_, gamma_, lambda);
  const std::size_t G = grid_.size();
  if (esq_.size() > 0) {
    const Eigen::VectorXd sums = esq_ * w;
    return (sums.cwiseProduct(inv_q_)).maxCoeff();
  }
  const std::size_t M = kernel_->truncation();
  const std::size_t chunks = std::min<std::size_t>(G, 64);
  std::vector<double> chunk_max(chunks, -std::numeric_limits<double>::infinity());
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = G * c / chunks;
    const std::size_t hi = G * (c + 1) / chunks;
    std::vector<double> scratch(M);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = lo; g < hi; ++g) {
      kernel_->eigenfunctions(grid_[g], scratch.data());
      double acc = 0.0;
      for (std::size_t j = 0; j < M; ++j) acc += w[static_cast<Eigen::Index>(j)] * scratch[j] * scratch[j];
      best = std::max(best, acc * inv_q_[static_cast<Eigen::Index>(g)]);
    }
    chunk_max[c] = best;
  });
  double out = -std::numeric_limits<double>::infinity();
  for (double v : chunk_max) out = std::max(out, v);
  return out;
}

double f_gamma(const DofQuery& q) {
  SupDofEvaluator eval(q.kernel, q.gamma, q.density, q.sup_grid);
  return eval(q.lambda);
}

double critical_penalty(const std::shared_ptr<const SpectralKernel>& kernel, double gamma,
                        std::size_t n, double delta, const Density& density,
                        std::vector<double> sup_grid) {
  if (n == 0) fail(ErrorCode::invalid_argument, "sample count must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  check_gamma_lambda(gamma, 0.0);
  SupDofEvaluator eval(kernel, gamma, density, std::move(sup_grid));
  const double dn = static_cast<double>(n);
  auto feasible = [&](double lambda) {
    const double F = eval(lambda);
    return dn >= 5.0 * F * std::max(1.0, std::log(14.0 * F / delta));
  };
  if (feasible(0.0)) return 0.0;
  double lo = 0.0;
  double hi = kernel->eigenvalue(1) * 1e6;
  if (!feasible(hi)) {
    fail(ErrorCode::domain, "critical penalty bracket failure: condition infeasible at lambda = mu_1 * 1e6");
  }
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-6 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

Density optimal_density(const std::shared_ptr<const SpectralKernel>& kernel, double gamma, double lambda) {
  return Density::spectral(kernel, gamma, lambda);
}

DofAsymptoticReport dof_asymptotic_check(const std::shared_ptr<const SpectralKernel>& kernel,
                                         double gamma, const std::vector<double>& lambda_grid) {
  if (kernel == nullptr) fail(ErrorCode::invalid_argument, "check requires a kernel");
  if (lambda_grid.size() < 3) fail(ErrorCode::invalid_argument, "lambda grid needs at least 3 points");
  double prev = 0.0;
  for (double l : lambda_grid) {
    if (!(l > prev)) fail(ErrorCode::invalid_argument, "lambda grid must be positive and strictly increasing");
    prev = l;
  }
  std::vector<double> ns(lambda_grid.size());
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    ns[i] = n_gamma(DofQuery(kernel, gamma, lambda_grid[i]));
  }
  DofAsymptoticReport rep;
  rep.law = kernel->spec().law_name();
  const auto beta = kernel->spec().decay_exponent();
  if (beta.has_value()) {
    const SlopeFit fit = fit_log_slope(lambda_grid, ns);
    rep.fitted_slope = fit.slope;
    rep.expected_slope = -1.0 / *beta;
    rep.pass = std::abs(fit.slope - *rep.expected_slope) <= 0.05;
    return rep;
  }
  if (rep.law == "exponential") {
    if (lambda_grid.back() >= 1.0) {
      fail(ErrorCode::invalid_argument, "exponential scaling check needs lambda < 1 so log(1/lambda) > 0");
    }
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      const double r = ns[i] / std::log(1.0 / lambda_grid[i]);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    rep.ratio_min = rmin;
    rep.ratio_max = rmax;
    rep.pass = rmax <= 3.0 * rmin;
    return rep;
  }
  // Explicit spectra are finite: N_gamma saturates at the mode count.
  rep.n_at_zero = n_gamma(DofQuery(kernel, gamma, 0.0));
  rep.mode_count = static_cast<double>(kernel->truncation());
  rep.pass = std::abs(*rep.n_at_zero - *rep.mode_count) <= 1e-9 * *rep.mode_count;
  return rep;
}

}  // namespace krr
