#pragma once

// Domain types shared by every stage of the pipeline: transition matrices,
// count streams, per-user location distributions and privacy parameters.
// All of them validate on construction and are immutable afterwards.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dpcorr {

using json = nlohmann::json;

inline constexpr double kStochasticTol = 1e-9;
inline constexpr double kConstraintTol = 1e-6;

enum class ErrorKind {
  InvalidArgument,
  RowNotStochastic,
  NegativeEntry,
  DimensionMismatch,
  NonInteriorPoint,
  InstanceTooLarge,
  IndexOutOfRange,
  ShapeMismatch,
  NonIntegerStream,
  Parse,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Row-stochastic m x m matrix; entry (i, j) = Pr(next = j | current = i).
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Matrix rows);

  std::size_t size() const noexcept { return rows_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return rows_(i, j); }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }
  const Matrix& matrix() const noexcept { return rows_; }

  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

 private:
  Matrix rows_;
};

TransitionMatrix validate_transition_matrix(const std::vector<std::vector<double>>& rows);

// Probability vector for the location of a single user at one timestep.
class LocationDistribution {
 public:
  explicit LocationDistribution(std::vector<double> probs);

  static LocationDistribution uniform(std::size_t m);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t l) const { return probs_[l]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const LocationDistribution&, const LocationDistribution&) = default;

 private:
  std::vector<double> probs_;
};

enum class StreamKind { True, Noisy, Estimate };

std::string_view to_string(StreamKind kind);

// T x m matrix of per-timestep location counts.
//  True:     nonnegative integers, every row sums to the population n.
//  Noisy:    unconstrained reals.
//  Estimate: nonnegative reals, every row sums to n within kConstraintTol.
class CountStream {
 public:
  static CountStream truth(Matrix values);
  static CountStream noisy(Matrix values);
  static CountStream estimate(Matrix values, double population);

  StreamKind kind() const noexcept { return kind_; }
  std::size_t steps() const noexcept { return values_.rows(); }
  std::size_t locations() const noexcept { return values_.cols(); }
  std::optional<double> population() const noexcept { return population_; }

  const Matrix& values() const noexcept { return values_; }
  std::span<const double> row(std::size_t t) const { return values_.row(t); }
  double operator()(std::size_t t, std::size_t l) const { return values_(t, l); }

  friend bool operator==(const CountStream&, const CountStream&) = default;

 private:
  CountStream(StreamKind kind, Matrix values, std::optional<double> population)
      : kind_(kind), values_(std::move(values)), population_(population) {}

  StreamKind kind_;
  Matrix values_;
  std::optional<double> population_;
};

enum class PrivacyMode { PlainDp, TemporalDp };

std::string_view to_string(PrivacyMode mode);

// Laplace scale is lambda = multiplier * sensitivity / budget, where the
// multiplier is forced to 1 in plain_dp mode.
class PrivacyParams {
 public:
  PrivacyParams(double sensitivity, double budget, PrivacyMode mode = PrivacyMode::PlainDp,
                double scale_multiplier = 1.0);

  double sensitivity() const noexcept { return sensitivity_; }
  double budget() const noexcept { return budget_; }
  PrivacyMode mode() const noexcept { return mode_; }
  double scale_multiplier() const noexcept { return scale_multiplier_; }
  double lambda() const noexcept;

 private:
  double sensitivity_;
  double budget_;
  PrivacyMode mode_;
  double scale_multiplier_;
};

enum class PriorPolicy { Frequency, Uniform };

std::string_view to_string(PriorPolicy policy);
PriorPolicy parse_prior_policy(std::string_view text);
PrivacyMode parse_privacy_mode(std::string_view text);

// Structured-text (JSON) serialization. Field names follow the domain model;
// matrices are row-major arrays of arrays.
json to_json(const Matrix& m);
json to_json(const TransitionMatrix& tm);
json to_json(const LocationDistribution& dist);
json to_json(const CountStream& stream);
json to_json(const PrivacyParams& params);

Matrix matrix_from_json(const json& j, std::string_view field);
TransitionMatrix transition_matrix_from_json(const json& j);
LocationDistribution location_distribution_from_json(const json& j);
CountStream count_stream_from_json(const json& j);
PrivacyParams privacy_params_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace dpcorr
