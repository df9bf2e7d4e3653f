#include "dpcorr/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace dpcorr {

std::string_view to_string(LogFactorialMode mode) {
  return mode == LogFactorialMode::Stirling ? "stirling" : "exact_log_gamma";
}

LogFactorialMode parse_log_factorial_mode(std::string_view text) {
  if (text == "stirling") return LogFactorialMode::Stirling;
  if (text == "exact_log_gamma") return LogFactorialMode::ExactLogGamma;
  throw Error(ErrorKind::Parse, "log-factorial mode must be stirling or exact_log_gamma, got '" +
                                    std::string(text) + "'");
}

ObjectiveSpec::ObjectiveSpec(double lambda_, std::vector<LocationDistribution> probs_, CountStream noisy_,
                             double population_, LogFactorialMode mode_, double floor_, bool hard_pin_)
    : lambda(lambda_),
      probs(std::move(probs_)),
      noisy(std::move(noisy_)),
      population(population_),
      mode(mode_),
      floor(floor_),
      hard_pin(hard_pin_) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  if (!(floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "floor must be positive");
  if (!(population > 0.0)) throw Error(ErrorKind::InvalidArgument, "population must be positive");
  if (probs.size() != noisy.steps())
    throw Error(ErrorKind::DimensionMismatch, "objective has " + std::to_string(probs.size()) +
                                                  " distributions for " + std::to_string(noisy.steps()) +
                                                  " timesteps");
  for (const auto& p : probs)
    if (p.size() != noisy.locations())
      throw Error(ErrorKind::DimensionMismatch, "distribution has " + std::to_string(p.size()) +
                                                    " locations, stream has " +
                                                    std::to_string(noisy.locations()));
}

double fidelity_term(std::span<const double> estimate_t, std::span<const double> noisy_t, double lambda) {
  if (estimate_t.size() != noisy_t.size())
    throw Error(ErrorKind::DimensionMismatch, "fidelity term needs equal-length vectors");
  double l1 = 0.0;
  for (std::size_t l = 0; l < estimate_t.size(); ++l) l1 += std::abs(noisy_t[l] - estimate_t[l]);
  return l1 / lambda;
}

double log_factorial(double x, LogFactorialMode mode, double floor) {
  if (mode == LogFactorialMode::ExactLogGamma) return boost::math::lgamma(x + 1.0);
  const double y = std::max(x, floor);
  return 0.5 * std::log(2.0 * std::numbers::pi * y) + y * (std::log(y) - 1.0);
}

double log_factorial_derivative(double x, LogFactorialMode mode, double floor) {
  if (mode == LogFactorialMode::ExactLogGamma) return boost::math::digamma(x + 1.0);
  const double y = std::max(x, floor);
  return 0.5 / y + std::log(y);
}

double prior_term(std::span<const double> estimate_t, const LocationDistribution& probs_t, double population,
                  LogFactorialMode mode, double floor) {
  if (estimate_t.size() != probs_t.size())
    throw Error(ErrorKind::DimensionMismatch, "prior term needs equal-length vectors");
  double log_pmf = boost::math::lgamma(population + 1.0);
  for (std::size_t l = 0; l < estimate_t.size(); ++l) {
    const double r = estimate_t[l];
    if (r != 0.0) log_pmf += r * std::log(std::max(probs_t[l], floor));
    log_pmf -= log_factorial(r, mode, floor);
  }
  return -log_pmf;
}

double step_objective(std::span<const double> estimate_t, const ObjectiveSpec& spec, std::size_t t) {
  return fidelity_term(estimate_t, spec.noisy.row(t), spec.lambda) +
         prior_term(estimate_t, spec.probs[t], spec.population, spec.mode, spec.floor);
}

double objective(const CountStream& estimate, const ObjectiveSpec& spec) {
  if (estimate.steps() != spec.steps() || estimate.locations() != spec.locations())
    throw Error(ErrorKind::DimensionMismatch,
                "estimate is " + std::to_string(estimate.steps()) + "x" + std::to_string(estimate.locations()) +
                    ", objective expects " + std::to_string(spec.steps()) + "x" +
                    std::to_string(spec.locations()));
  double total = 0.0;
  for (std::size_t t = 0; t < estimate.steps(); ++t) total += step_objective(estimate.row(t), spec, t);
  return total;
}

std::vector<double> subgradient(std::span<const double> estimate_t, const ObjectiveSpec& spec, std::size_t t) {
  const auto noisy_t = spec.noisy.row(t);
  if (estimate_t.size() != noisy_t.size())
    throw Error(ErrorKind::DimensionMismatch, "subgradient needs an m-vector");
  std::vector<double> g(estimate_t.size());
  for (std::size_t l = 0; l < g.size(); ++l) {
    const double r = estimate_t[l];
    if (!(r > spec.floor))
      throw Error(ErrorKind::NonInteriorPoint, "entry " + std::to_string(l) + " is not above the floor");
    const double diff = noisy_t[l] - r;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    g[l] = -sign / spec.lambda - std::log(std::max(spec.probs[t][l], spec.floor)) +
           log_factorial_derivative(r, spec.mode, spec.floor);
  }
  return g;
}

}  // namespace dpcorr
