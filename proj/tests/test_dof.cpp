#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <memory>

#include "core/common.hpp"
#include "core/dof.hpp"
#include "core/spectrum.hpp"

using namespace krr;

namespace {

std::shared_ptr<const SpectralKernel> make_kernel(SpectrumSpec spec, EigenFamily fam) {
  return std::make_shared<SpectralKernel>(std::move(spec), fam);
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return g;
}

}  // namespace

TEST_CASE("average dof for a two-mode spectrum") {
  // Oracle: 1/(1+1) + 0.5/(0.5+1) = 5/6.
  auto k = make_kernel(SpectrumSpec::explicit_values({1.0, 0.5}), EigenFamily::abstract_indicator);
  CHECK(n_gamma(DofQuery(k, 1.0, 1.0)) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  // gamma = 2: (1/2)^2 + (1/3)^2 = 13/36.
  CHECK(n_gamma(DofQuery(k, 2.0, 1.0)) == doctest::Approx(13.0 / 36.0).epsilon(1e-15));
  // lambda = 0 counts every mode once.
  CHECK(n_gamma(DofQuery(k, 1.0, 0.0)) == 2.0);
}

TEST_CASE("average dof saturates at the truncation and vanishes for huge penalties") {
  auto k = make_kernel(SpectrumSpec::brownian(300), EigenFamily::brownian_sine);
  CHECK(n_gamma(DofQuery(k, 0.7, 0.0)) == doctest::Approx(300.0).epsilon(1e-14));
  CHECK(n_gamma(DofQuery(k, 1.0, 1e12)) < 1e-9);
}

TEST_CASE("dof monotonicity in lambda and gamma ordering") {
  auto k = make_kernel(SpectrumSpec::brownian(2000), EigenFamily::brownian_sine);
  const auto grid = default_sup_grid(512);
  double prev_n = std::numeric_limits<double>::infinity();
  double prev_f = std::numeric_limits<double>::infinity();
  for (double lambda : log_grid(1e-8, 1e2, 11)) {
    const DofQuery q(k, 1.0, lambda, Density::uniform(), grid);
    const double nv = n_gamma(q);
    const double fv = f_gamma(q);
    CHECK(nv <= prev_n);
    CHECK(fv <= prev_f);
    CHECK(fv >= nv - 1e-9 * nv);
    prev_n = nv;
    prev_f = fv;
  }
  // Larger gamma shrinks every weight (mu/(mu+lambda) < 1), so both shrink.
  for (double lambda : {1e-4, 1e-2}) {
    const DofQuery q1(k, 0.8, lambda, Density::uniform(), grid);
    const DofQuery q2(k, 1.6, lambda, Density::uniform(), grid);
    CHECK(n_gamma(q2) <= n_gamma(q1));
    CHECK(f_gamma(q2) <= f_gamma(q1));
  }
}

TEST_CASE("single constant eigenfunction gives f_gamma = weight") {
  auto k = make_kernel(SpectrumSpec::explicit_values({1.0}), EigenFamily::abstract_indicator);
  const DofQuery q(k, 1.0, 1.0);
  CHECK(f_gamma(q) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(n_gamma(q) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("translation-invariant torus kernel equalizes sup and average dof") {
  auto k = make_kernel(SpectrumSpec::power(2.0, 1.0, 101), EigenFamily::torus_fourier);
  for (double gamma : {0.6, 1.0, 1.7}) {
    for (double lambda : {1e-4, 1e-2, 1.0}) {
      const DofQuery q(k, gamma, lambda);
      const double nv = n_gamma(q);
      const double fv = f_gamma(q);
      CHECK(std::abs(fv - nv) / nv <= 1e-8);
    }
  }
}

TEST_CASE("sup dof under the matched spectral density collapses to the average") {
  // (1/nu) sum_j w_j e_j^2 == N pointwise when nu = sum_j w_j e_j^2 / N.
  auto ki = make_kernel(SpectrumSpec::exponential(0.5, 32), EigenFamily::abstract_indicator);
  auto kb = make_kernel(SpectrumSpec::brownian(400), EigenFamily::brownian_sine);
  for (const auto& k : {ki, kb}) {
    const double gamma = 1.0, lambda = 1e-3;
    const Density nu = optimal_density(k, gamma, lambda);
    const DofQuery q(k, gamma, lambda, nu, default_sup_grid(1024));
    const double nv = n_gamma(q);
    CHECK(f_gamma(q) == doctest::Approx(nv).epsilon(1e-10));
  }
}

TEST_CASE("brownian sup grid refinement is stable and sits near twice the average") {
  auto k = make_kernel(SpectrumSpec::brownian(2000), EigenFamily::brownian_sine);
  const double lambda = 1e-3;
  const DofQuery q1(k, 1.0, lambda, Density::uniform(), default_sup_grid(4096));
  const DofQuery q2(k, 1.0, lambda, Density::uniform(), default_sup_grid(8192));
  const double f1 = f_gamma(q1);
  const double f2 = f_gamma(q2);
  CHECK(std::abs(f2 - f1) / f1 < 0.01);
  // Every sine mode squares to 2 at x = 1, so the sup ratio approaches 2.
  const double nv = n_gamma(q1);
  CHECK(f1 / nv > 1.8);
  CHECK(f1 / nv < 2.05);
}

TEST_CASE("streaming sup evaluation matches a direct serial loop") {
  // Grid x modes above the cache budget exercises the streaming path.
  auto k = make_kernel(SpectrumSpec::brownian(25000), EigenFamily::brownian_sine);
  const auto grid = default_sup_grid(1024);
  const double gamma = 1.0, lambda = 1e-4;
  SupDofEvaluator eval(k, gamma, Density::uniform(), grid);
  const double got = eval(lambda);
  double want = 0.0;
  std::vector<double> scratch(k->truncation());
  for (double x : grid) {
    k->eigenfunctions(x, scratch.data());
    double acc = 0.0;
    for (std::size_t j = 1; j <= k->truncation(); ++j) {
      const double mu = k->eigenvalue(j);
      acc += mu / (mu + lambda) * scratch[j - 1] * scratch[j - 1];
    }
    want = std::max(want, acc);
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("worker count does not change sup evaluation") {
  auto k = make_kernel(SpectrumSpec::brownian(25000), EigenFamily::brownian_sine);
  SupDofEvaluator eval(k, 1.0, Density::uniform(), default_sup_grid(512));
  setenv("KRR_THREADS", "1", 1);
  const double serial = eval(1e-3);
  setenv("KRR_THREADS", "4", 1);
  const double parallel = eval(1e-3);
  unsetenv("KRR_THREADS");
  CHECK(serial == parallel);
}

TEST_CASE("critical penalty returns zero when the sample size already suffices") {
  auto k = make_kernel(SpectrumSpec::brownian(100), EigenFamily::brownian_sine);
  CHECK(critical_penalty(k, 1.0, 1000000, 0.1) == 0.0);
}

TEST_CASE("critical penalty agrees with an exhaustive scan") {
  auto k = make_kernel(SpectrumSpec::brownian(1000), EigenFamily::brownian_sine);
  const double gamma = 1.0, delta = 0.1;
  const std::size_t n = 1000;
  const auto grid = default_sup_grid(128);
  const double lstar = critical_penalty(k, gamma, n, delta, Density::uniform(), grid);
  CHECK(lstar > 0.0);

  SupDofEvaluator eval(k, gamma, Density::uniform(), grid);
  auto feasible = [&](double lambda) {
    const double F = eval(lambda);
    return static_cast<double>(n) >= 5.0 * F * std::max(1.0, std::log(14.0 * F / delta));
  };
  // The feasible set is an up-set in lambda, so the scan brackets the infimum
  // between the first feasible grid point and its predecessor.
  const auto scan = log_grid(1e-6, 1.0, 10000);
  std::size_t first = scan.size();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (feasible(scan[i])) {
      first = i;
      break;
    }
  }
  REQUIRE(first < scan.size());
  REQUIRE(first > 0);
  CHECK(lstar <= scan[first] * (1.0 + 1e-9));
  CHECK(lstar >= scan[first - 1] * (1.0 - 1e-9));
  // Returned point is feasible; nudging it down by more than the bisection
  // tolerance is not.
  CHECK(feasible(lstar));
  CHECK_FALSE(feasible(lstar * (1.0 - 3e-6)));
}

TEST_CASE("critical penalty is monotone in sample size and failure budget") {
  auto k = make_kernel(SpectrumSpec::brownian(1000), EigenFamily::brownian_sine);
  const auto grid = default_sup_grid(256);
  const double l_n500 = critical_penalty(k, 1.0, 500, 0.1, Density::uniform(), grid);
  const double l_n2000 = critical_penalty(k, 1.0, 2000, 0.1, Density::uniform(), grid);
  CHECK(l_n500 >= l_n2000);
  const double l_d001 = critical_penalty(k, 1.0, 500, 0.01, Density::uniform(), grid);
  const double l_d02 = critical_penalty(k, 1.0, 500, 0.2, Density::uniform(), grid);
  CHECK(l_d001 >= l_d02);
}

TEST_CASE("spectral density basics") {
  auto k1 = make_kernel(SpectrumSpec::explicit_values({1.0}), EigenFamily::brownian_sine);
  const Density nu = optimal_density(k1, 1.0, 1e-3);
  // Single mode: nu(x) = e_1(x)^2 = 2 sin^2(pi x / 2).
  CHECK(nu(0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nu(1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(nu.mass() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(nu.tag() == "nu(gamma=1,lambda=0.001)");

  auto kt = make_kernel(SpectrumSpec::power(2.0, 1.0, 101), EigenFamily::torus_fourier);
  const Density nut = optimal_density(kt, 1.0, 1e-2);
  for (double x : {0.1, 0.45, 0.8}) CHECK(nut(x) == doctest::Approx(1.0).epsilon(1e-12));

  auto kb = make_kernel(SpectrumSpec::brownian(500), EigenFamily::brownian_sine);
  CHECK(optimal_density(kb, 1.0, 1e-3).mass() == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(Density::uniform().mass() == 1.0);
  CHECK(Density::uniform().tag() == "uniform");
}

TEST_CASE("spectral density rejects lambda = 0") {
  auto k = make_kernel(SpectrumSpec::brownian(100), EigenFamily::brownian_sine);
  CHECK_THROWS_AS(optimal_density(k, 1.0, 0.0), Error);
}

TEST_CASE("query validation") {
  auto k = make_kernel(SpectrumSpec::brownian(100), EigenFamily::brownian_sine);
  CHECK_THROWS_AS(DofQuery(nullptr, 1.0, 0.0), Error);
  CHECK_THROWS_AS(DofQuery(k, 0.0, 1.0), Error);
  CHECK_THROWS_AS(DofQuery(k, -1.0, 1.0), Error);
  CHECK_THROWS_AS(DofQuery(k, 1.0, -1e-9), Error);
  CHECK_THROWS_AS(DofQuery(k, 1.0, 0.0, Density::uniform(), {0.5, 1.5}), Error);
}

TEST_CASE("divergence warning tracks the spectral sum growth test") {
  auto slow = make_kernel(SpectrumSpec::power(1.01, 1.0, 10000), EigenFamily::torus_fourier);
  CHECK(DofQuery(slow, 1.0, 1e-3).divergence_warning);
  auto fast = make_kernel(SpectrumSpec::brownian(10000), EigenFamily::brownian_sine);
  CHECK_FALSE(DofQuery(fast, 1.0, 1e-3).divergence_warning);
  CHECK(DofQuery(fast, 0.4, 1e-3).divergence_warning);
}

TEST_CASE("lambda scaling check across spectrum classes") {
  auto pw = make_kernel(SpectrumSpec::power(2.0, 1.0, 200000), EigenFamily::torus_fourier);
  const auto rep = dof_asymptotic_check(pw, 1.0, log_grid(1e-6, 1e-2, 25));
  REQUIRE(rep.fitted_slope.has_value());
  CHECK(*rep.expected_slope == doctest::Approx(-0.5));
  CHECK(std::abs(*rep.fitted_slope - -0.5) <= 0.05);
  CHECK(rep.pass);

  auto ex = make_kernel(SpectrumSpec::exponential(0.5, 200), EigenFamily::torus_fourier);
  const auto rep2 = dof_asymptotic_check(ex, 1.0, log_grid(1e-6, 1e-2, 25));
  REQUIRE(rep2.ratio_min.has_value());
  CHECK(*rep2.ratio_max <= 3.0 * *rep2.ratio_min);
  CHECK(rep2.pass);

  auto el = make_kernel(SpectrumSpec::explicit_values({1.0, 0.5, 0.25, 0.125}),
                        EigenFamily::abstract_indicator);
  const auto rep3 = dof_asymptotic_check(el, 1.0, log_grid(1e-4, 1e-1, 5));
  REQUIRE(rep3.n_at_zero.has_value());
  CHECK(*rep3.n_at_zero == doctest::Approx(4.0));
  CHECK(rep3.pass);

  CHECK_THROWS_AS(dof_asymptotic_check(pw, 1.0, {1e-3, 1e-2}), Error);
  CHECK_THROWS_AS(dof_asymptotic_check(pw, 1.0, {1e-2, 1e-3, 1e-1}), Error);
  CHECK_THROWS_AS(dof_asymptotic_check(ex, 1.0, {0.1, 1.0, 10.0}), Error);
}
