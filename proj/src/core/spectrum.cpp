#include "core/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "core/common.hpp"

namespace krr {

namespace {

constexpr double pi = std::numbers::pi;

double law_value(const SpectrumLaw& law, std::size_t j) {
  return std::visit(
      [j](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        const double dj = static_cast<double>(j);
        if constexpr (std::is_same_v<T, PowerLaw>) {
          return l.scale * std::pow(dj, -l.beta);
        } else if constexpr (std::is_same_v<T, PowerLogLaw>) {
          return std::pow(dj, -l.beta) * std::pow(1.0 + std::log(dj), -l.alpha);
        } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
          return std::pow(l.c, dj);
        } else if constexpr (std::is_same_v<T, ExplicitLaw>) {
          return l.values.at(j - 1);
        } else {
          const double w = 0.5 * pi * (2.0 * dj - 1.0);
          return 1.0 / (w * w);
        }
      },
      law);
}

void check_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    fail(ErrorCode::domain, std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
  }
}

}  // namespace

SpectrumSpec SpectrumSpec::power(double beta, double scale, std::size_t M) {
  SpectrumSpec s{PowerLaw{beta, scale}, M};
  s.validate();
  return s;
}

SpectrumSpec SpectrumSpec::power_log(double beta, double alpha, std::size_t M) {
  SpectrumSpec s{PowerLogLaw{beta, alpha}, M};
  s.validate();
  return s;
}

SpectrumSpec SpectrumSpec::exponential(double c, std::size_t M) {
  SpectrumSpec s{ExponentialLaw{c}, M};
  s.validate();
  return s;
}

SpectrumSpec SpectrumSpec::explicit_values(std::vector<double> values) {
  const std::size_t M = values.size();
  SpectrumSpec s{ExplicitLaw{std::move(values)}, M};
  s.validate();
  return s;
}

SpectrumSpec SpectrumSpec::brownian(std::size_t M) {
  SpectrumSpec s{BrownianLaw{}, M};
  s.validate();
  return s;
}

void SpectrumSpec::validate() const {
  if (truncation == 0) fail(ErrorCode::invalid_argument, "spectrum truncation must be at least 1");
  std::visit(
      [this](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          if (!(l.beta > 1.0)) fail(ErrorCode::invalid_argument, "power law requires beta > 1");
          if (!(l.scale > 0.0)) fail(ErrorCode::invalid_argument, "power law requires scale > 0");
        } else if constexpr (std::is_same_v<T, PowerLogLaw>) {
          if (!(l.beta > 1.0)) fail(ErrorCode::invalid_argument, "power-log law requires beta > 1");
          if (!(l.alpha >= 0.0)) fail(ErrorCode::invalid_argument, "power-log law requires alpha >= 0");
        } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
          if (!(l.c > 0.0 && l.c < 1.0)) {
            fail(ErrorCode::invalid_argument, "exponential law requires c in (0, 1)");
          }
        } else if constexpr (std::is_same_v<T, ExplicitLaw>) {
          if (l.values.empty()) fail(ErrorCode::invalid_argument, "explicit law requires at least one value");
          if (truncation > l.values.size()) {
            fail(ErrorCode::invalid_argument, "explicit law truncation exceeds the value list");
          }
          double prev = std::numeric_limits<double>::infinity();
          for (double v : l.values) {
            if (!std::isfinite(v) || v <= 0.0) {
              fail(ErrorCode::invalid_argument, "explicit eigenvalues must be finite and positive");
            }
            if (v > prev) fail(ErrorCode::invalid_argument, "explicit eigenvalues must be non-increasing");
            prev = v;
          }
        }
      },
      law);
}

std::string SpectrumSpec::law_name() const {
  return std::visit(
      [](const auto& l) -> std::string {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLaw>) return "power";
        else if constexpr (std::is_same_v<T, PowerLogLaw>) return "power-log";
        else if constexpr (std::is_same_v<T, ExponentialLaw>) return "exponential";
        else if constexpr (std::is_same_v<T, ExplicitLaw>) return "explicit";
        else return "brownian";
      },
      law);
}

double SpectrumSpec::eigenvalue(std::size_t j) const {
  if (j == 0) fail(ErrorCode::invalid_argument, "eigenvalue index is 1-based");
  if (const auto* e = std::get_if<ExplicitLaw>(&law); e != nullptr && j > e->values.size()) {
    fail(ErrorCode::invalid_argument, "eigenvalue index exceeds the explicit value list");
  }
  return law_value(law, j);
}

std::optional<double> SpectrumSpec::decay_exponent() const {
  if (std::holds_alternative<PowerLaw>(law)) return std::get<PowerLaw>(law).beta;
  if (std::holds_alternative<PowerLogLaw>(law)) return std::get<PowerLogLaw>(law).beta;
  if (std::holds_alternative<BrownianLaw>(law)) return 2.0;
  return std::nullopt;
}

double SpectrumSpec::tail_sum_bound(std::size_t M) const {
  const double dm = static_cast<double>(M);
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          return l.scale * std::pow(dm, 1.0 - l.beta) / (l.beta - 1.0);
        } else if constexpr (std::is_same_v<T, PowerLogLaw>) {
          return std::pow(dm, 1.0 - l.beta) / (l.beta - 1.0);
        } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
          return std::pow(l.c, dm + 1.0) / (1.0 - l.c);
        } else if constexpr (std::is_same_v<T, ExplicitLaw>) {
          double s = 0.0;
          for (std::size_t j = M; j < l.values.size(); ++j) s += l.values[j];
          return s;
        } else {
          return (4.0 / (pi * pi)) / (2.0 * (2.0 * dm - 1.0));
        }
      },
      law);
}

bool SpectrumSpec::spectral_sum_diverges(double gamma) const {
  if (!(gamma > 0.0)) fail(ErrorCode::invalid_argument, "gamma must be positive");
  const std::size_t M = truncation;
  if (M < 8) return false;
  double older = 0.0, newer = 0.0;
  for (std::size_t j = M / 4 + 1; j <= M / 2; ++j) older += std::pow(eigenvalue(j), gamma);
  for (std::size_t j = M / 2 + 1; j <= M; ++j) newer += std::pow(eigenvalue(j), gamma);
  return newer > 0.99 * older;
}

const char* family_name(EigenFamily f) {
  switch (f) {
    case EigenFamily::brownian_sine: return "brownian-sine";
    case EigenFamily::torus_fourier: return "torus-fourier";
    case EigenFamily::abstract_indicator: return "abstract-indicator";
  }
  fail(ErrorCode::internal, "unknown eigenfunction family");
}

SpectralKernel::SpectralKernel(SpectrumSpec spec, EigenFamily family)
    : spec_(std::move(spec)), family_(family) {
  spec_.validate();
  const std::size_t M = spec_.truncation;
  mu_.resize(static_cast<Eigen::Index>(M));
  if (family_ == EigenFamily::torus_fourier) {
    // Shared eigenvalue per frequency pair: indices (2m, 2m+1) both take the
    // law at 2m, so the synthesized kernel depends only on x - y.
    for (std::size_t j = 1; j <= M; ++j) {
      const std::size_t base = (j == 1) ? 1 : 2 * (j / 2);
      mu_[static_cast<Eigen::Index>(j - 1)] = spec_.eigenvalue(base);
    }
  } else {
    for (std::size_t j = 1; j <= M; ++j) {
      mu_[static_cast<Eigen::Index>(j - 1)] = spec_.eigenvalue(j);
    }
  }
}

double SpectralKernel::eigenvalue(std::size_t j) const {
  if (j == 0 || j > truncation()) {
    fail(ErrorCode::invalid_argument, "kernel eigenvalue index out of range");
  }
  return mu_[static_cast<Eigen::Index>(j - 1)];
}

double SpectralKernel::eigenfunction(std::size_t j, double x) const {
  double v = 0.0;
  eigenfunction_block(x, j, 1, &v);
  return v;
}

void SpectralKernel::eigenfunction_block(double x, std::size_t j0, std::size_t count, double* out) const {
  check_unit_interval(x, "evaluation point");
  if (j0 == 0 || count == 0 || j0 + count - 1 > truncation()) {
    fail(ErrorCode::invalid_argument, "eigenfunction index range out of bounds");
  }
  constexpr std::size_t resync = 256;
  const double sqrt2 = std::numbers::sqrt2;
  switch (family_) {
    case EigenFamily::brownian_sine: {
      // e_j(x) = sqrt(2) sin((2j - 1) a), a = pi x / 2; step angle 2a.
      const double a = 0.5 * pi * x;
      const double c2 = std::cos(2.0 * a), s2 = std::sin(2.0 * a);
      double s = 0.0, c = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = j0 + i;
        if (i % resync == 0) {
          const double th = (2.0 * static_cast<double>(j) - 1.0) * a;
          s = std::sin(th);
          c = std::cos(th);
        } else {
          const double ns = s * c2 + c * s2;
          const double nc = c * c2 - s * s2;
          s = ns;
          c = nc;
        }
        out[i] = sqrt2 * s;
      }
      return;
    }
    case EigenFamily::torus_fourier: {
      // e_1 = 1; e_2m = sqrt(2) cos(2 pi m x); e_2m+1 = sqrt(2) sin(2 pi m x).
      const double step = 2.0 * pi * x;
      const double cs = std::cos(step), ss = std::sin(step);
      double c = 0.0, s = 0.0;
      std::size_t m_cur = 0;
      std::size_t since_sync = resync;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = j0 + i;
        if (j == 1) {
          out[i] = 1.0;
          continue;
        }
        const std::size_t m = j / 2;
        if (m != m_cur) {
          if (m == m_cur + 1 && since_sync < resync) {
            const double nc = c * cs - s * ss;
            const double nsn = s * cs + c * ss;
            c = nc;
            s = nsn;
            ++since_sync;
          } else {
            const double th = static_cast<double>(m) * step;
            c = std::cos(th);
            s = std::sin(th);
            since_sync = 0;
          }
          m_cur = m;
        }
        out[i] = sqrt2 * ((j % 2 == 0) ? c : s);
      }
      return;
    }
    case EigenFamily::abstract_indicator: {
      // Partition of [0, 1) into M cells; e_j = sqrt(M) on cell j.
      const std::size_t M = truncation();
      std::size_t bin = static_cast<std::size_t>(static_cast<double>(M) * x);
      if (bin >= M) bin = M - 1;
      const double amp = std::sqrt(static_cast<double>(M));
      for (std::size_t i = 0; i < count; ++i) out[i] = (j0 + i - 1 == bin) ? amp : 0.0;
      return;
    }
  }
  fail(ErrorCode::internal, "unknown eigenfunction family");
}

bool SpectralKernel::has_closed_form() const {
  return std::holds_alternative<BrownianLaw>(spec_.law) && family_ == EigenFamily::brownian_sine;
}

double SpectralKernel::eval(double x, double y) const {
  if (has_closed_form()) {
    check_unit_interval(x, "evaluation point");
    check_unit_interval(y, "evaluation point");
    return std::min(x, y);
  }
  return eval_truncated(x, y);
}

double SpectralKernel::eval_truncated(double x, double y) const {
  const std::size_t M = truncation();
  std::vector<double> ex(M), ey(M);
  eigenfunctions(x, ex.data());
  eigenfunctions(y, ey.data());
  double acc = 0.0;
  for (std::size_t j = 0; j < M; ++j) acc += mu_[static_cast<Eigen::Index>(j)] * ex[j] * ey[j];
  return acc;
}

double SpectralKernel::truncation_error_bound() const {
  if (family_ == EigenFamily::abstract_indicator) return 0.0;
  const std::size_t M = truncation();
  // Torus pairing can promote the law value by one index; charging the tail
  // from M - 1 covers both families. Eigenfunctions are bounded by sqrt(2).
  const std::size_t from = (family_ == EigenFamily::torus_fourier && M > 1) ? M - 1 : M;
  return 2.0 * spec_.tail_sum_bound(from);
}

namespace {

Eigen::VectorXd resolve_density(const Eigen::VectorXd& q, Eigen::Index n) {
  if (q.size() == 0) return Eigen::VectorXd::Ones(n);
  if (q.size() != n) fail(ErrorCode::invalid_argument, "density weights must match the point count");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(q[i] > 0.0)) fail(ErrorCode::domain, "density weights must be strictly positive");
  }
  return q;
}

}  // namespace

Eigen::MatrixXd SpectralKernel::gram(const Eigen::VectorXd& x, const Eigen::VectorXd& q) const {
  if (!has_closed_form()) return gram_truncated(x, q);
  const Eigen::Index n = x.size();
  if (n == 0) fail(ErrorCode::invalid_argument, "gram matrix requires at least one point");
  const Eigen::VectorXd qq = resolve_density(q, n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    check_unit_interval(x[i], "gram point");
    w[i] = 1.0 / std::sqrt(static_cast<double>(n) * qq[i]);
  }
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = std::min(x[i], x[j]) * w[i] * w[j];
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

Eigen::MatrixXd SpectralKernel::gram_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& q) const {
  const Eigen::Index n = x.size();
  if (n == 0) fail(ErrorCode::invalid_argument, "gram matrix requires at least one point");
  const std::size_t M = truncation();
  if (static_cast<std::size_t>(n) * M > std::size_t{100000000}) {
    fail(ErrorCode::invalid_argument, "gram eigenfunction cache would exceed the n * M budget");
  }
  const Eigen::VectorXd qq = resolve_density(q, n);
  // Row-major so each point's eigenfunction block lands contiguously.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> E(n, static_cast<Eigen::Index>(M));
  for (Eigen::Index i = 0; i < n; ++i) {
    eigenfunctions(x[i], E.row(i).data());
    E.row(i) *= 1.0 / std::sqrt(static_cast<double>(n) * qq[i]);
  }
  Eigen::MatrixXd G = E * mu_.asDiagonal() * E.transpose();
  // Symmetrize away the rounding skew from the blocked product.
  G = 0.5 * (G + G.transpose()).eval();
  return G;
}

}  // namespace krr
