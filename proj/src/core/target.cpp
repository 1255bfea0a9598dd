#include "core/target.hpp"

#include <cmath>

#include "core/common.hpp"

namespace krr {

namespace {

bool energy_diverges(const Eigen::VectorXd& c) {
  const Eigen::Index M = c.size();
  if (M < 8) return false;
  double older = 0.0, newer = 0.0;
  for (Eigen::Index j = M / 4; j < M / 2; ++j) older += c[j] * c[j];
  for (Eigen::Index j = M / 2; j < M; ++j) newer += c[j] * c[j];
  return newer > 0.99 * older && newer > 0.0;
}

}  // namespace

TargetFunction make_power_law_target(double s, std::size_t M) {
  if (!(s > 0.0)) fail(ErrorCode::invalid_argument, "power-law target requires s > 0");
  if (M == 0) fail(ErrorCode::invalid_argument, "target needs at least one coefficient");
  TargetFunction t;
  t.kind = "power-law";
  t.s = s;
  t.coeffs.resize(static_cast<Eigen::Index>(M));
  for (std::size_t j = 1; j <= M; ++j) {
    t.coeffs[static_cast<Eigen::Index>(j - 1)] = std::pow(static_cast<double>(j), -(0.5 + s));
  }
  t.slow_decay_warning = energy_diverges(t.coeffs);
  return t;
}

TargetFunction make_first_mode_target(std::size_t M) {
  if (M == 0) fail(ErrorCode::invalid_argument, "target needs at least one coefficient");
  TargetFunction t;
  t.kind = "first-mode";
  t.s = std::numeric_limits<double>::infinity();
  t.coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
  t.coeffs[0] = 1.0;
  return t;
}

TargetFunction make_explicit_target(Eigen::VectorXd coeffs, double s_label) {
  if (coeffs.size() == 0) fail(ErrorCode::invalid_argument, "target needs at least one coefficient");
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    if (!std::isfinite(coeffs[j])) fail(ErrorCode::invalid_argument, "target coefficients must be finite");
  }
  TargetFunction t;
  t.kind = "explicit";
  t.s = s_label;
  t.coeffs = std::move(coeffs);
  t.slow_decay_warning = energy_diverges(t.coeffs);
  return t;
}

double target_value(const TargetFunction& target, const SpectralKernel& kernel, double x) {
  Eigen::VectorXd xs(1);
  xs << x;
  return target_values(target, kernel, xs)[0];
}

Eigen::VectorXd target_values(const TargetFunction& target, const SpectralKernel& kernel,
                              const Eigen::VectorXd& xs) {
  const std::size_t M = static_cast<std::size_t>(target.coeffs.size());
  if (M > kernel.truncation()) {
    fail(ErrorCode::invalid_argument, "target has more modes than the kernel carries");
  }
  Eigen::VectorXd out(xs.size());
  std::vector<double> scratch(M);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    kernel.eigenfunction_block(xs[i], 1, M, scratch.data());
    double acc = 0.0;
    for (std::size_t j = 0; j < M; ++j) acc += target.coeffs[static_cast<Eigen::Index>(j)] * scratch[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace krr
