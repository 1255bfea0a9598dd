#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/spectrum.hpp"

namespace krr {

// Sampling density on the unit interval relative to the uniform measure.
// Either uniform (q == 1) or the spectrally weighted density proportional to
// sum_j (mu_j / (mu_j + lambda))^gamma e_j(x)^2.
class Density {
public:
  static Density uniform();
  static Density spectral(std::shared_ptr<const SpectralKernel> kernel, double gamma, double lambda);
  // Arbitrary positive function; callers that need a probability density
  // (e.g. the sampler) check the mass themselves.
  static Density custom(std::function<double(double)> fn, std::string tag);

  bool is_uniform() const { return kernel_ == nullptr && !fn_; }
  double operator()(double x) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& xs) const;
  // Quadrature check of integral over [0, 1]; a proper density returns ~1.
  double mass(std::size_t panels = 2500) const;
  std::string tag() const;

private:
  Density() = default;
  std::shared_ptr<const SpectralKernel> kernel_;  // null unless spectral
  Eigen::VectorXd weights_;                       // (mu/(mu+lambda))^gamma / normalizer
  std::function<double(double)> fn_;              // null unless custom
  std::string custom_tag_;
  double gamma_ = 0.0;
  double lambda_ = 0.0;
};

std::vector<double> default_sup_grid(std::size_t size = 4096);

// One degrees-of-freedom query: gamma > 0, lambda >= 0, a kernel, a sampling
// density, and the grid over which the essential supremum is approximated.
// divergence_warning is set when the dyadic growth test suggests the
// gamma-power spectral sum does not converge at this truncation.
struct DofQuery {
  DofQuery(std::shared_ptr<const SpectralKernel> kernel, double gamma, double lambda,
           Density density = Density::uniform(), std::vector<double> sup_grid = {});

  std::shared_ptr<const SpectralKernel> kernel;
  double gamma;
  double lambda;
  Density density;
  std::vector<double> sup_grid;
  bool divergence_warning = false;
};

// Average degrees of freedom: sum_j (mu_j / (mu_j + lambda))^gamma.
double n_gamma(const DofQuery& q);

// Grid approximation of the essential supremum of
// (1 / q(x)) sum_j (mu_j / (mu_j + lambda))^gamma e_j(x)^2.
double f_gamma(const DofQuery& q);

// Reusable evaluator over a fixed grid; caches e_j(x)^2 when the grid x mode
// table fits in a fixed memory budget, otherwise streams per evaluation.
// Shared by the critical-penalty bisection and scan-style cross-checks.
class SupDofEvaluator {
public:
  SupDofEvaluator(std::shared_ptr<const SpectralKernel> kernel, double gamma, Density density,
                  std::vector<double> sup_grid);
  double operator()(double lambda) const;

private:
  std::shared_ptr<const SpectralKernel> kernel_;
  double gamma_;
  Density density_;
  std::vector<double> grid_;
  Eigen::VectorXd inv_q_;
  // Row-major grid x modes table of e_j(x_g)^2, empty when streaming.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> esq_;
};

// Smallest lambda such that n >= 5 F_gamma(lambda) max(1, log(14 F_gamma(lambda) / delta)),
// located by bisection to 1e-6 relative width; 0 when the condition already
// holds at lambda = 0.
double critical_penalty(const std::shared_ptr<const SpectralKernel>& kernel, double gamma,
                        std::size_t n, double delta, const Density& density = Density::uniform(),
                        std::vector<double> sup_grid = {});

// Normalized spectral density for the given penalty; lambda must be positive
// (at lambda = 0 every mode gets weight one and the normalization diverges
// with the truncation, so the object would be meaningless).
Density optimal_density(const std::shared_ptr<const SpectralKernel>& kernel, double gamma, double lambda);

struct DofAsymptoticReport {
  std::string law;
  // Polynomial-decay laws: fitted log N vs log lambda slope and -1/beta.
  std::optional<double> fitted_slope;
  std::optional<double> expected_slope;
  // Exponential law: range of N_gamma(lambda) / log(1 / lambda) over the grid.
  std::optional<double> ratio_min;
  std::optional<double> ratio_max;
  // Explicit law: N_gamma(0) against the mode count.
  std::optional<double> n_at_zero;
  std::optional<double> mode_count;
  bool pass = false;
};

// Checks the lambda scaling of N_gamma over a positive, increasing grid:
// slope -1/beta within 0.05 for polynomial laws, log(1/lambda) proportionality
// within an overall factor 3 for the exponential law, plateau at the list
// length for explicit spectra.
DofAsymptoticReport dof_asymptotic_check(const std::shared_ptr<const SpectralKernel>& kernel,
                                         double gamma, const std::vector<double>& lambda_grid);

}  // namespace krr
