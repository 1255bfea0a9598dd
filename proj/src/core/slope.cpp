#include "core/slope.hpp"

#include <array>
#include <cmath>

#include "core/common.hpp"

namespace krr {

namespace {

// Two-sided 97.5% Student t quantiles for df = 1..30; 1.96 beyond.
constexpr std::array<double, 30> t975 = {
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

double t_critical(std::size_t df) {
  if (df == 0) return 0.0;
  if (df <= t975.size()) return t975[df - 1];
  return 1.960;
}

}  // namespace

SlopeFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t k = xs.size();
  if (k != ys.size()) fail(ErrorCode::invalid_argument, "slope fit needs matching x and y lengths");
  if (k < 3) fail(ErrorCode::invalid_argument, "slope fit needs at least 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::invalid_argument, "slope fit needs non-degenerate x values");
  SlopeFit f;
  f.points = k;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += r * r;
  }
  const std::size_t df = k - 2;
  const double var = ssr / static_cast<double>(df);
  f.std_error = std::sqrt(var / sxx);
  const double half = t_critical(df) * f.std_error;
  f.ci_lo = f.slope - half;
  f.ci_hi = f.slope + half;
  return f;
}

SlopeFit fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) fail(ErrorCode::invalid_argument, "slope fit needs matching x and y lengths");
  std::vector<double> lx(xs.size()), ly(ys.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > prev)) fail(ErrorCode::invalid_argument, "log-log fit needs strictly increasing positive x");
    prev = xs[i];
    if (!(ys[i] > 0.0)) fail(ErrorCode::domain, "log-log fit needs strictly positive y values");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_line(lx, ly);
}

}  // namespace krr
