#pragma once

#include <cstddef>
#include <vector>

namespace krr {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;  // standard error of the slope estimate
  double ci_lo = 0.0;      // 95% confidence interval for the slope
  double ci_hi = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares of ys against xs. Requires at least 3 points so the
// residual variance has a degree of freedom; an exact line yields a
// zero-width confidence interval.
SlopeFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

// OLS in log-log coordinates. xs must be strictly increasing and positive;
// ys must be strictly positive (log of a non-positive value has no meaning
// for an error curve, so that is a domain error, not a NaN).
SlopeFit fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace krr
