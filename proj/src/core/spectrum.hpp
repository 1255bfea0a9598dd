#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace krr {

// Eigenvalue laws, 1-based index j. All laws must produce strictly positive,
// non-increasing sequences; validate() enforces the parameter domains.
struct PowerLaw {
  double beta = 2.0;   // > 1
  double scale = 1.0;  // > 0
};
struct PowerLogLaw {
  double beta = 2.0;   // > 1
  double alpha = 0.0;  // >= 0; factor (1 + ln j)^-alpha keeps j = 1 finite
};
struct ExponentialLaw {
  double c = 0.5;  // in (0, 1)
};
struct ExplicitLaw {
  std::vector<double> values;  // finite, positive, non-increasing
};
struct BrownianLaw {};  // mu_j = (2 / (pi (2j - 1)))^2

using SpectrumLaw = std::variant<PowerLaw, PowerLogLaw, ExponentialLaw, ExplicitLaw, BrownianLaw>;

struct SpectrumSpec {
  SpectrumLaw law;
  std::size_t truncation = 10000;  // M, number of modes materialized

  static SpectrumSpec power(double beta, double scale, std::size_t M);
  static SpectrumSpec power_log(double beta, double alpha, std::size_t M);
  static SpectrumSpec exponential(double c, std::size_t M);
  static SpectrumSpec explicit_values(std::vector<double> values);
  static SpectrumSpec brownian(std::size_t M);

  void validate() const;
  std::string law_name() const;

  // Raw law value at index j (1-based), independent of any eigenfunction family.
  double eigenvalue(std::size_t j) const;

  // beta for laws with polynomial decay j^-beta; nullopt for exponential/explicit.
  std::optional<double> decay_exponent() const;

  // Upper bound on sum_{j > M} mu_j.
  double tail_sum_bound(std::size_t M) const;

  // Partial-sum growth test for sum_j mu_j^gamma: compares the last two dyadic
  // blocks below the truncation; a ratio above 0.99 marks the sum as
  // effectively divergent at this truncation.
  bool spectral_sum_diverges(double gamma) const;
};

enum class EigenFamily { brownian_sine, torus_fourier, abstract_indicator };

const char* family_name(EigenFamily f);

// Kernel defined by its eigensystem: k(x, y) = sum_j mu_j e_j(x) e_j(y),
// truncated at M modes, over the unit interval with the uniform measure.
//
// For the torus family the cos/sin pair at each frequency shares one
// eigenvalue (the law at the pair's first index); that keeps the kernel
// translation invariant, which downstream equalities rely on. The other
// families take the law values per index unchanged.
class SpectralKernel {
public:
  SpectralKernel(SpectrumSpec spec, EigenFamily family);

  const SpectrumSpec& spec() const { return spec_; }
  EigenFamily family() const { return family_; }
  std::size_t truncation() const { return static_cast<std::size_t>(mu_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return mu_; }
  double eigenvalue(std::size_t j) const;

  double eigenfunction(std::size_t j, double x) const;
  // Fills out[0..count) with e_{j0}(x) .. e_{j0 + count - 1}(x). Trig families
  // use an angle-addition recurrence resynchronized every few hundred modes,
  // so bulk evaluation costs a handful of multiplies per mode.
  void eigenfunction_block(double x, std::size_t j0, std::size_t count, double* out) const;
  void eigenfunctions(double x, double* out) const { eigenfunction_block(x, 1, truncation(), out); }

  bool has_closed_form() const;
  double eval(double x, double y) const;
  double eval_truncated(double x, double y) const;

  // Upper bound on |eval_truncated - untruncated kernel| valid uniformly in (x, y).
  double truncation_error_bound() const;

  // Entries k(x_i, x_j) / (n sqrt(q_i q_j)) with n = x.size(). Empty q means
  // q == 1. Uses the closed form when available, the truncated series otherwise.
  Eigen::MatrixXd gram(const Eigen::VectorXd& x, const Eigen::VectorXd& q = Eigen::VectorXd()) const;
  // Always sums the truncated series; reference path for cross-checks.
  Eigen::MatrixXd gram_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& q = Eigen::VectorXd()) const;

private:
  SpectrumSpec spec_;
  EigenFamily family_;
  Eigen::VectorXd mu_;
};

}  // namespace krr
