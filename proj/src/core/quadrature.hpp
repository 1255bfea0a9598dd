#pragma once

#include <array>
#include <cstddef>

namespace krr {

// Composite 8-point Gauss-Legendre on [a, b]. `panels * 8` function
// evaluations; degree-15 exactness per panel is plenty for the oscillatory
// eigenfunction products checked in tests (error falls like h^16).
template <typename F>
double integrate(F&& f, double a, double b, std::size_t panels) {
  static constexpr std::array<double, 4> xs = {
      0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr std::array<double, 4> ws = {
      0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double mid = a + (static_cast<double>(k) + 0.5) * h;
    const double half = 0.5 * h;
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
      acc += ws[i] * (f(mid - half * xs[i]) + f(mid + half * xs[i]));
    }
    total += acc * half;
  }
  return total;
}

}  // namespace krr
