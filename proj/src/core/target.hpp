#pragma once

#include <Eigen/Core>
#include <limits>
#include <memory>
#include <string>

#include "core/spectrum.hpp"

namespace krr {

// Regression target expressed in the eigenbasis: f*(x) = sum_{j<=M} c_j e_j(x).
// `s` is a descriptive smoothness label used by rate predictions; it is
// infinity for the first-mode target and NaN when an explicit coefficient
// list carries no label.
struct TargetFunction {
  Eigen::VectorXd coeffs;
  std::string kind;
  double s = std::numeric_limits<double>::quiet_NaN();
  // Dyadic growth test on sum c_j^2: set when the coefficient energy fails to
  // decay across the last blocks, i.e. the series is not square summable at
  // this truncation.
  bool slow_decay_warning = false;
};

// c_j = j^-(0.5 + s), s > 0.
TargetFunction make_power_law_target(double s, std::size_t M);
// c = (1, 0, 0, ...): the smoothest target, lying on the first eigenfunction.
TargetFunction make_first_mode_target(std::size_t M);
TargetFunction make_explicit_target(Eigen::VectorXd coeffs,
                                    double s_label = std::numeric_limits<double>::quiet_NaN());

// Pointwise evaluation against a kernel's eigenfunction family. The kernel
// must carry at least as many modes as the target.
double target_value(const TargetFunction& target, const SpectralKernel& kernel, double x);
Eigen::VectorXd target_values(const TargetFunction& target, const SpectralKernel& kernel,
                              const Eigen::VectorXd& xs);

}  // namespace krr
