#pragma once

// Negative log-posterior for MAP post-processing of a noisy count stream.
//
// Per timestep t the objective is
//
//   (1/lambda) * sum_l |noisy_l - r_l|                        (Laplace fidelity)
//   - [ ln n! + sum_l ( r_l ln P_l - ln r_l! ) ]              (multinomial prior)
//
// where P is the propagated per-user location distribution. ln r! is either
// ln Gamma(r + 1) or Stirling's formula ln(2 pi r)/2 + r ln(r/e). Stirling
// diverges to -inf as r -> 0, so it is evaluated at max(r, floor); the exact
// mode is well defined on the whole feasible set and is the default.

#include <cstddef>
#include <span>
#include <vector>

#include "dpcorr/core_model.hpp"

namespace dpcorr {

enum class LogFactorialMode { Stirling, ExactLogGamma };

std::string_view to_string(LogFactorialMode mode);
LogFactorialMode parse_log_factorial_mode(std::string_view text);

inline constexpr double kDefaultLogFloor = 1e-6;

struct ObjectiveSpec {
  ObjectiveSpec(double lambda, std::vector<LocationDistribution> probs, CountStream noisy, double population,
                LogFactorialMode mode = LogFactorialMode::ExactLogGamma, double floor = kDefaultLogFloor,
                bool hard_pin = true);

  double lambda;
  std::vector<LocationDistribution> probs;
  CountStream noisy;
  double population;
  LogFactorialMode mode;
  // lower bound applied to probabilities inside ln and to Stirling arguments
  double floor;
  // cells whose P is exactly 0 are fixed to 0 by the solver
  bool hard_pin;

  std::size_t steps() const noexcept { return noisy.steps(); }
  std::size_t locations() const noexcept { return noisy.locations(); }
};

double fidelity_term(std::span<const double> estimate_t, std::span<const double> noisy_t, double lambda);

double log_factorial(double x, LogFactorialMode mode, double floor = kDefaultLogFloor);

/// d/dx of log_factorial: digamma(x + 1), or 1/(2x) + ln x for Stirling.
double log_factorial_derivative(double x, LogFactorialMode mode, double floor = kDefaultLogFloor);

/// -ln Pr(R^t = estimate_t) under Multinomial(n, probs_t), extended to reals.
double prior_term(std::span<const double> estimate_t, const LocationDistribution& probs_t, double population,
                  LogFactorialMode mode, double floor = kDefaultLogFloor);

/// fidelity_term + prior_term for timestep t.
double step_objective(std::span<const double> estimate_t, const ObjectiveSpec& spec, std::size_t t);

/// Sum of step_objective over all timesteps.
double objective(const CountStream& estimate, const ObjectiveSpec& spec);

/// Subgradient of step_objective at an interior point (every entry > floor).
/// The L1 part uses sign(0) = 0.
std::vector<double> subgradient(std::span<const double> estimate_t, const ObjectiveSpec& spec, std::size_t t);

}  // namespace dpcorr
