#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"
#include "core/rng.hpp"

namespace krr {

Dataset Dataset::from_raw(Eigen::VectorXd x, Eigen::VectorXd q, Eigen::VectorXd y) {
  const Eigen::Index n = x.size();
  if (n == 0) fail(ErrorCode::invalid_argument, "dataset needs at least one point");
  if (q.size() != n || y.size() != n) {
    fail(ErrorCode::invalid_argument, "dataset vectors must share one length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) fail(ErrorCode::domain, "dataset points must lie in [0, 1]");
    if (!(q[i] > 0.0)) fail(ErrorCode::domain, "dataset density values must be positive");
  }
  Dataset d;
  d.x = std::move(x);
  d.q = std::move(q);
  d.clean = std::move(y);
  d.noise = Eigen::VectorXd::Zero(n);
  d.sigma = 0.0;
  d.has_noise_split = false;
  return d;
}

CdfTable::CdfTable(const Density& density) {
  const std::size_t K = cells;
  const double h = 1.0 / static_cast<double>(K);
  Eigen::VectorXd nodes(static_cast<Eigen::Index>(K + 1));
  for (std::size_t k = 0; k <= K; ++k) nodes[static_cast<Eigen::Index>(k)] = static_cast<double>(k) * h;
  const Eigen::VectorXd pdf = density.evaluate(nodes);
  for (Eigen::Index i = 0; i < pdf.size(); ++i) {
    if (!(pdf[i] >= 0.0) || !std::isfinite(pdf[i])) {
      fail(ErrorCode::domain, "density must be finite and non-negative on [0, 1]");
    }
  }
  cum_.resize(static_cast<Eigen::Index>(K + 1));
  cum_[0] = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    cum_[static_cast<Eigen::Index>(k)] =
        cum_[static_cast<Eigen::Index>(k - 1)] +
        0.5 * h * (pdf[static_cast<Eigen::Index>(k - 1)] + pdf[static_cast<Eigen::Index>(k)]);
  }
  mass_ = cum_[static_cast<Eigen::Index>(K)];
  if (!(mass_ > 0.0)) fail(ErrorCode::domain, "density integrates to zero");
  cum_ /= mass_;
}

double CdfTable::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double pos = x * static_cast<double>(cells);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(pos), cells - 1);
  const double frac = pos - static_cast<double>(k);
  const double lo = cum_[static_cast<Eigen::Index>(k)];
  const double hi = cum_[static_cast<Eigen::Index>(k + 1)];
  return lo + frac * (hi - lo);
}

double CdfTable::invert(double u) const {
  // cum_ is non-decreasing with cum_[0] = 0, cum_[K] = 1; binary search for
  // the cell containing u, then interpolate linearly inside it.
  const Eigen::Index K = cum_.size() - 1;
  Eigen::Index lo = 0, hi = K;
  while (hi - lo > 1) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (cum_[mid] <= u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double c0 = cum_[lo], c1 = cum_[hi];
  const double h = 1.0 / static_cast<double>(cells);
  const double base = static_cast<double>(lo) * h;
  if (c1 <= c0) return base;  // zero-mass cell
  return base + h * std::min(1.0, (u - c0) / (c1 - c0));
}

Dataset sample_dataset(const TargetFunction& target, const std::shared_ptr<const SpectralKernel>& kernel,
                       std::size_t n, const Density& density, double sigma, std::uint64_t seed) {
  if (kernel == nullptr) fail(ErrorCode::invalid_argument, "sampling requires a kernel");
  if (n == 0) fail(ErrorCode::invalid_argument, "dataset needs at least one point");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::invalid_argument, "noise level must be finite and non-negative");
  }
  Dataset d;
  d.sigma = sigma;
  d.seed = seed;
  d.x.resize(static_cast<Eigen::Index>(n));
  d.q.resize(static_cast<Eigen::Index>(n));
  Rng rng(seed);
  if (density.is_uniform()) {
    for (std::size_t i = 0; i < n; ++i) {
      d.x[static_cast<Eigen::Index>(i)] = rng.uniform();
      d.q[static_cast<Eigen::Index>(i)] = 1.0;
    }
  } else {
    const CdfTable table(density);
    if (std::abs(table.mass() - 1.0) > 1e-3) {
      fail(ErrorCode::domain, "sampling density does not integrate to 1 (mass " +
                                  std::to_string(table.mass()) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) {
      d.x[static_cast<Eigen::Index>(i)] = table.invert(rng.uniform());
    }
    // Normalized density values; these are the weights the estimator divides by.
    d.q = density.evaluate(d.x) / table.mass();
    for (Eigen::Index i = 0; i < d.x.size(); ++i) {
      if (!(d.q[i] > 0.0)) fail(ErrorCode::domain, "sampled a point with zero density");
    }
  }
  d.clean = target_values(target, *kernel, d.x);
  d.noise.resize(static_cast<Eigen::Index>(n));
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < n; ++i) d.noise[static_cast<Eigen::Index>(i)] = sigma * rng.normal();
  } else {
    d.noise.setZero();
  }
  return d;
}

}  // namespace krr
