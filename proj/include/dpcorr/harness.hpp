#pragma once

// Experiment harness: generation -> release -> post-processing -> metrics,
// repeated over a grid of (smoothing level, horizon, budget) points with a
// fixed seed schedule.
//
// Seed schedule: the cell seed for (seed_base, point_index, run) is 64-bit
// FNV-1a over the ASCII text "<seed_base>:<point_index>:<run>" (decimal).
// Every method at a cell sees the same trajectories and the same noise; the
// trajectory, release and restart draws use separate sub-streams of that seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpcorr/core_model.hpp"
#include "dpcorr/posterior.hpp"
#include "dpcorr/solver.hpp"

namespace dpcorr {

enum class Method { MapFrequency, MapUniform, BaselineMle, RawNoisy };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t cell_seed(std::uint64_t seed_base, std::size_t point_index, std::size_t run);

struct ExperimentConfig {
  explicit ExperimentConfig(TransitionMatrix base) : base_matrix(std::move(base)) {}

  TransitionMatrix base_matrix;
  std::vector<double> smoothing_s{0.0};
  std::vector<double> budgets{1.0};
  PrivacyMode budget_mode = PrivacyMode::PlainDp;
  double scale_multiplier = 1.0;
  double sensitivity = 1.0;
  std::vector<std::size_t> steps{500};
  std::size_t n_users = 200;
  PriorPolicy prior_policy = PriorPolicy::Frequency;  // default MAP prior for the postprocess command
  std::optional<LocationDistribution> initial;        // synthetic users start uniform when unset
  std::size_t runs = 50;
  std::uint64_t seed_base = 0;
  SolverConfig solver;
  LogFactorialMode log_factorial = LogFactorialMode::ExactLogGamma;
  double floor = kDefaultLogFloor;
  bool hard_pin = true;
  std::vector<Method> methods{Method::MapFrequency, Method::MapUniform, Method::BaselineMle, Method::RawNoisy};
  bool record_wall_time = false;
  std::size_t plausibility_max_users = 5;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const json& j);
json to_json(const ExperimentConfig& config);

struct SweepPoint {
  std::size_t index;
  double s;
  std::size_t steps;
  double budget;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config);

struct PostprocessOptions {
  LogFactorialMode log_factorial = LogFactorialMode::ExactLogGamma;
  double floor = kDefaultLogFloor;
  bool hard_pin = true;
  SolverConfig solver;
};

struct PostprocessResult {
  CountStream estimate;
  std::optional<double> objective;
  std::optional<SolveReport> report;
};

PostprocessResult postprocess(Method method, const CountStream& noisy, const TransitionMatrix& tm, double lambda,
                              std::size_t population, const PostprocessOptions& options);

struct CellMetrics {
  double mse;
  std::optional<std::size_t> plausibility_violations;
};

/// MSE against the truth, plus plausibility violations of the rounded stream
/// when the population is at most `plausibility_max_users`.
CellMetrics evaluate(const CountStream& estimate, const CountStream& truth, const TransitionMatrix& tm,
                     bool plausibility_applicable, std::size_t plausibility_max_users);

// Ground truth and release for one (point, run) cell, shared by all methods.
struct CellData {
  std::uint64_t seed;
  TransitionMatrix tm;
  double lambda;
  CountStream truth;
  CountStream noisy;
};

CellData simulate_cell(const ExperimentConfig& config, const SweepPoint& point, std::size_t run);

struct SweepRow {
  Method method;
  std::size_t point_index;
  double budget;
  std::size_t steps;
  double s;
  std::size_t run;
  std::uint64_t seed;
  double mse;
  std::optional<std::size_t> plausibility_violations;
  std::optional<double> objective;
  std::optional<double> wall_ms;
};

struct PointMean {
  Method method;
  std::size_t point_index;
  double budget;
  std::size_t steps;
  double s;
  std::size_t runs;
  double mean_mse;
  double sd_mse;
  std::optional<double> mean_plausibility_violations;
  std::optional<double> mean_objective;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<PointMean> means;

  const PointMean& mean(Method method, std::size_t point_index) const;
};

/// Runs every (point, run) cell; `threads` = 0 keeps the OpenMP default.
SweepResult run_sweep(const ExperimentConfig& config, int threads = 0);

std::string format_rows_csv(const SweepResult& result);
std::string format_means_csv(const SweepResult& result);

/// Writes rows.csv and means.csv under `out_dir`.
void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace dpcorr
