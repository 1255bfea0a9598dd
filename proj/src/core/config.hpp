#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/harness.hpp"
#include "core/spectrum.hpp"
#include "core/target.hpp"

namespace krr {

// Config sections mirror the JSON file one to one. Every field has a default,
// so `{}` is a complete config; parsing merges user keys over these values,
// rejects anything unknown, and reports every validation error at once, each
// prefixed with the dotted path of the offending key.

struct KernelConfig {
  // brownian | power | power-log | exponential | explicit
  std::string law = "brownian";
  double beta = 2.0;   // power, power-log: decay exponent, > 1
  double alpha = 0.0;  // power-log: log-correction exponent, >= 0
  // power: scale, > 0; exponential: ratio, in (0, 1); unused otherwise
  double c = 1.0;
  std::size_t M = 10000;  // modes materialized; the explicit law uses mu.size()
  // brownian-sine | torus-fourier | abstract-indicator
  std::string family = "brownian-sine";
  std::vector<double> mu;  // explicit law only: positive, non-increasing

  bool operator==(const KernelConfig&) const = default;
};

struct TargetConfig {
  // power-law | first-mode | explicit
  std::string kind = "power-law";
  double s = 0.5;  // power-law smoothness, > 0; other kinds ignore it
  // explicit only: at most the kernel's mode count, zero-padded up to it
  std::vector<double> coeffs;

  bool operator==(const TargetConfig&) const = default;
};

struct ExperimentConfig {
  std::string id = "rates";
  std::vector<double> p_list{0.0};
  std::vector<std::size_t> n_grid{32, 64, 128, 256, 512, 1024};
  std::size_t n = 100;  // single-size commands: solve, sweep-lambda
  // fixed | pseudo-zero | noisy-optimal
  std::string lambda_policy = "fixed";
  double lambda = 1e-20;   // fixed-policy penalty; also the solve penalty
  double lambda_c = 0.05;  // noise-optimal prefactor
  std::vector<double> lambda_grid{1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6,
                                  1e-5,  1e-4,  1e-3,  1e-2, 1e-1, 1.0};
  double sigma = 0.0;
  std::size_t reps = 20;
  std::uint64_t seed = 1;
  std::size_t m_trunc = 10000;
  double slope_tol = 0.0;  // 0 picks the per-experiment default
  std::vector<double> s_list{1.0, 1.5, 2.0, 3.0};  // saturate
  std::size_t n_divergent = 100;  // p-scan sample size past the threshold
  std::size_t m_base = 5000;      // p-scan truncation before doubling
  double gamma = 1.0;             // dof
  // uniform | optimal (the spectrally weighted density at (gamma, lambda))
  std::string density = "uniform";
  std::size_t dirichlet_m = 20;  // even
  std::size_t dirichlet_n = 10;
  std::size_t dirichlet_trials = 100;

  bool operator==(const ExperimentConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "csv";  // csv | json
  bool plots = false;          // also write per-series plot data for rate runs

  bool operator==(const OutputConfig&) const = default;
};

struct Config {
  KernelConfig kernel;
  TargetConfig target;
  ExperimentConfig experiment;
  OutputConfig output;

  bool operator==(const Config&) const = default;
};

// Text parse: one JSON object. File parse adds the missing-file failure mode.
Config parse_config_text(const std::string& json_text);
Config parse_config(const std::string& path);

// Every key written explicitly, sections in declaration order, so that
// parse_config_text(emit_config(c)) == c.
std::string emit_config(const Config& config);

std::shared_ptr<const SpectralKernel> build_kernel(const Config& config);
// `modes` is the built kernel's truncation; targets span it exactly.
TargetFunction build_target(const Config& config, std::size_t modes);
// `policy_name` lets a caller override config.experiment.lambda_policy, e.g.
// the noisy-rates command always runs the noise-optimal schedule.
LambdaPolicy build_lambda_policy(const Config& config, const std::string& policy_name,
                                 const SpectralKernel& kernel, const TargetFunction& target);
ExperimentPlan build_plan(const Config& config);

}  // namespace krr
