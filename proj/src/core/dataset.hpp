#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>

#include "core/dof.hpp"
#include "core/target.hpp"

namespace krr {

// A weighted sample: points x_i drawn from q, density values q(x_i), clean
// labels f*(x_i), and the noise realization kept separately so downstream
// analyses can split the fit into its noise-free and noise-only parts.
struct Dataset {
  Eigen::VectorXd x;
  Eigen::VectorXd q;
  Eigen::VectorXd clean;
  Eigen::VectorXd noise;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  // False for datasets built from raw labels, where the clean/noise split is
  // unknown and clean holds the observed labels.
  bool has_noise_split = true;

  Eigen::Index n() const { return x.size(); }
  Eigen::VectorXd labels() const { return clean + noise; }

  static Dataset from_raw(Eigen::VectorXd x, Eigen::VectorXd q, Eigen::VectorXd y);
};

// Draws n points from `density` (inverse CDF over a 2^16-cell table for
// non-uniform densities), evaluates the target, and adds N(0, sigma^2) noise.
// Point coordinates are drawn before any noise so the design and clean labels
// do not depend on sigma. Deterministic in `seed`.
Dataset sample_dataset(const TargetFunction& target, const std::shared_ptr<const SpectralKernel>& kernel,
                       std::size_t n, const Density& density, double sigma, std::uint64_t seed);

// Inverse-CDF table for a density on [0, 1]; exposed for distribution checks.
class CdfTable {
public:
  static constexpr std::size_t cells = 65536;
  explicit CdfTable(const Density& density);
  double mass() const { return mass_; }                // trapezoid integral before normalization
  double cdf(double x) const;                          // normalized CDF at x
  double invert(double u) const;                       // u in [0, 1)
private:
  Eigen::VectorXd cum_;  // normalized cumulative values at k / cells
  double mass_ = 1.0;
};

}  // namespace krr
