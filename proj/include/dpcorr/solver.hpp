#pragma once

// Per-timestep MAP solver over the scaled simplex {r >= 0, sum r = n}.
//
// The objective has no coupling across timesteps once the propagated
// distributions are fixed, so every step is solved independently. Two
// algorithms are available:
//
//  * DualBisection: exact KKT solve for the convex (exact log-gamma)
//    objective. Each coordinate's minimizer of g_l(r) - mu * r has a closed
//    form through the inverse digamma; a safeguarded Newton/bisection search
//    finds the multiplier mu with sum_l r_l(mu) = n.
//  * Subgradient: projected, normalized subgradient descent with steps
//    c / sqrt(k) from several feasible starts. Used for the nonconvex
//    Stirling objective, or on request.
//
// solve_map runs timesteps in parallel with OpenMP; solve_map_serial is the
// single-threaded reference and must agree bit for bit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpcorr/core_model.hpp"
#include "dpcorr/posterior.hpp"

namespace dpcorr {

enum class RoundMode { None, LargestRemainder };
enum class SolverAlgorithm { Auto, Subgradient, DualBisection };

std::string_view to_string(RoundMode mode);
std::string_view to_string(SolverAlgorithm algorithm);
RoundMode parse_round_mode(std::string_view text);
SolverAlgorithm parse_solver_algorithm(std::string_view text);

struct SolverConfig {
  std::size_t max_iters = 5000;
  double step_scale = 1.0;  // c in c / sqrt(k)
  double tol = 1e-8;        // relative objective change that counts as converged
  std::size_t restarts = 3;
  RoundMode round_mode = RoundMode::None;
  SolverAlgorithm algorithm = SolverAlgorithm::Auto;
  std::uint64_t seed = 0;   // random restart points
  bool record_history = false;

  void validate() const;
};

json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const json& j);

struct StepReport {
  double objective = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;   // |sum r - n|
  double min_entry = 0.0;
  bool converged = true;
  bool rounded = false;
  std::vector<double> best_history;  // running best objective per iteration, when recorded
};

struct SolveReport {
  std::vector<StepReport> steps;
  double total_objective = 0.0;
  double wall_ms = 0.0;

  std::size_t nonconverged_steps() const;
};

json to_json(const SolveReport& report);

struct StepSolution {
  std::vector<double> estimate;
  StepReport report;
};

struct SolveResult {
  CountStream estimate;
  SolveReport report;
};

/// Euclidean projection onto {r >= 0, sum r = total} by sort-and-threshold.
std::vector<double> project_simplex(std::span<const double> v, double total);

/// Sum-preserving rounding: floor every entry, then hand the remaining units
/// to the largest fractional parts (ties go to the lower index).
std::vector<double> largest_remainder(std::span<const double> r, long long total);

StepSolution solve_step(const ObjectiveSpec& spec, std::size_t t, const SolverConfig& config);

SolveResult solve_map(const ObjectiveSpec& spec, const SolverConfig& config);
SolveResult solve_map_serial(const ObjectiveSpec& spec, const SolverConfig& config);

/// Correlation-agnostic baseline: per step minimize ||noisy_t - r||_1 over the
/// simplex. The L1 argmin is a set; the Euclidean projection of noisy_t lies in
/// it and is the representative returned.
CountStream solve_baseline_mle(const CountStream& noisy, double lambda, double population);

struct OracleResult {
  std::vector<long long> counts;
  double objective = 0.0;
  std::size_t candidates = 0;
};

inline constexpr std::size_t kOracleLimit = 1'000'000;

/// Exhaustive search over nonnegative integer vectors summing to n, in
/// lexicographic order; the first minimizer wins ties.
OracleResult brute_force_oracle(const ObjectiveSpec& spec, std::size_t t);

/// C(n + m - 1, m - 1), saturating at SIZE_MAX.
std::size_t composition_count(std::size_t n, std::size_t m);

}  // namespace dpcorr
