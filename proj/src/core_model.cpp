#include "dpcorr/core_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dpcorr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::RowNotStochastic: return "RowNotStochastic";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonInteriorPoint: return "NonInteriorPoint";
    case ErrorKind::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonIntegerStream: return "NonIntegerStream";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols())
      throw Error(ErrorKind::DimensionMismatch, "ragged matrix: row " + std::to_string(r) +
                                                    " has " + std::to_string(rows[r].size()) +
                                                    " entries, expected " + std::to_string(m.cols()));
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// ---------------------------------------------------------------------------

TransitionMatrix::TransitionMatrix(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.rows() != rows_.cols())
    throw Error(ErrorKind::DimensionMismatch,
                "transition matrix must be square with m >= 1, got " + std::to_string(rows_.rows()) +
                    "x" + std::to_string(rows_.cols()));
  for (std::size_t i = 0; i < rows_.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < rows_.cols(); ++j) {
      const double p = rows_(i, j);
      if (!std::isfinite(p) || p < 0.0)
        throw Error(ErrorKind::NegativeEntry, "entry (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") is not a probability");
      if (p > 1.0)
        throw Error(ErrorKind::RowNotStochastic, "entry (" + std::to_string(i) + "," +
                                                     std::to_string(j) + ") exceeds 1");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "row " << i << " sums to " << sum;
      throw Error(ErrorKind::RowNotStochastic, msg.str());
    }
  }
}

TransitionMatrix validate_transition_matrix(const std::vector<std::vector<double>>& rows) {
  return TransitionMatrix(Matrix::from_rows(rows));
}

// ---------------------------------------------------------------------------

LocationDistribution::LocationDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorKind::InvalidArgument, "location distribution is empty");
  double sum = 0.0;
  for (std::size_t l = 0; l < probs_.size(); ++l) {
    if (!std::isfinite(probs_[l]) || probs_[l] < 0.0)
      throw Error(ErrorKind::NegativeEntry, "probs[" + std::to_string(l) + "] is negative");
    sum += probs_[l];
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "probs sum to " << sum;
    throw Error(ErrorKind::RowNotStochastic, msg.str());
  }
}

LocationDistribution LocationDistribution::uniform(std::size_t m) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "uniform distribution needs m >= 1");
  return LocationDistribution(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

// ---------------------------------------------------------------------------

std::string_view to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::True: return "true";
    case StreamKind::Noisy: return "noisy";
    case StreamKind::Estimate: return "estimate";
  }
  return "unknown";
}

CountStream CountStream::truth(Matrix values) {
  if (values.rows() == 0 || values.cols() == 0)
    throw Error(ErrorKind::InvalidArgument, "true stream must have T >= 1 and m >= 1");
  double n = -1.0;
  for (std::size_t t = 0; t < values.rows(); ++t) {
    double sum = 0.0;
    for (double v : values.row(t)) {
      if (!std::isfinite(v) || v < 0.0 || v != std::floor(v))
        throw Error(ErrorKind::NonIntegerStream,
                    "true stream row " + std::to_string(t) + " holds a non-count value");
      sum += v;
    }
    if (t == 0) n = sum;
    if (sum != n)
      throw Error(ErrorKind::ShapeMismatch, "true stream row " + std::to_string(t) +
                                                " sums to " + std::to_string(sum) +
                                                ", expected " + std::to_string(n));
  }
  return CountStream(StreamKind::True, std::move(values), n);
}

CountStream CountStream::noisy(Matrix values) {
  if (values.rows() == 0 || values.cols() == 0)
    throw Error(ErrorKind::InvalidArgument, "noisy stream must have T >= 1 and m >= 1");
  for (double v : values.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "noisy stream holds a non-finite value");
  return CountStream(StreamKind::Noisy, std::move(values), std::nullopt);
}

CountStream CountStream::estimate(Matrix values, double population) {
  if (values.rows() == 0 || values.cols() == 0)
    throw Error(ErrorKind::InvalidArgument, "estimate stream must have T >= 1 and m >= 1");
  for (std::size_t t = 0; t < values.rows(); ++t) {
    double sum = 0.0;
    for (double v : values.row(t)) {
      if (!std::isfinite(v) || v < 0.0)
        throw Error(ErrorKind::NegativeEntry,
                    "estimate row " + std::to_string(t) + " holds a negative entry");
      sum += v;
    }
    if (std::abs(sum - population) > kConstraintTol)
      throw Error(ErrorKind::ShapeMismatch, "estimate row " + std::to_string(t) + " sums to " +
                                                std::to_string(sum) + ", expected " +
                                                std::to_string(population));
  }
  return CountStream(StreamKind::Estimate, std::move(values), population);
}

// ---------------------------------------------------------------------------

std::string_view to_string(PrivacyMode mode) {
  return mode == PrivacyMode::PlainDp ? "plain_dp" : "temporal_dp";
}

PrivacyMode parse_privacy_mode(std::string_view text) {
  if (text == "plain_dp") return PrivacyMode::PlainDp;
  if (text == "temporal_dp") return PrivacyMode::TemporalDp;
  throw Error(ErrorKind::Parse, "mode must be plain_dp or temporal_dp, got '" + std::string(text) + "'");
}

PrivacyParams::PrivacyParams(double sensitivity, double budget, PrivacyMode mode, double scale_multiplier)
    : sensitivity_(sensitivity), budget_(budget), mode_(mode), scale_multiplier_(scale_multiplier) {
  if (!(sensitivity > 0.0) || !std::isfinite(sensitivity))
    throw Error(ErrorKind::InvalidArgument, "sensitivity must be positive");
  if (!(budget > 0.0) || !std::isfinite(budget))
    throw Error(ErrorKind::InvalidArgument, "budget must be positive");
  if (!(scale_multiplier > 0.0) || !std::isfinite(scale_multiplier))
    throw Error(ErrorKind::InvalidArgument, "scale_multiplier must be positive");
  if (!(lambda() > 0.0)) throw Error(ErrorKind::InvalidArgument, "derived lambda underflows to 0");
}

double PrivacyParams::lambda() const noexcept {
  const double multiplier = mode_ == PrivacyMode::TemporalDp ? scale_multiplier_ : 1.0;
  return multiplier * sensitivity_ / budget_;
}

std::string_view to_string(PriorPolicy policy) {
  return policy == PriorPolicy::Frequency ? "frequency" : "uniform";
}

PriorPolicy parse_prior_policy(std::string_view text) {
  if (text == "frequency") return PriorPolicy::Frequency;
  if (text == "uniform") return PriorPolicy::Uniform;
  throw Error(ErrorKind::Parse, "prior policy must be frequency or uniform, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// serialization

namespace {

const json& require(const json& j, std::string_view field) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "expected an object holding '" + std::string(field) + "'");
  auto it = j.find(std::string(field));
  if (it == j.end()) throw Error(ErrorKind::Parse, "missing field '" + std::string(field) + "'");
  return *it;
}

template <typename T>
T get_field(const json& j, std::string_view field) {
  const json& v = require(j, field);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' has the wrong type");
  }
}

std::size_t get_count(const json& j, std::string_view field) {
  const json& v = require(j, field);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

}  // namespace

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::string_view field) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' must be an array of arrays");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    if (!row.is_array()) throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' must be an array of arrays");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' holds a non-number");
      r.push_back(v.get<double>());
    }
    rows.push_back(std::move(r));
  }
  return Matrix::from_rows(rows);
}

json to_json(const TransitionMatrix& tm) {
  return json{{"m", tm.size()}, {"rows", to_json(tm.matrix())}};
}

TransitionMatrix transition_matrix_from_json(const json& j) {
  const std::size_t m = get_count(j, "m");
  Matrix rows = matrix_from_json(require(j, "rows"), "rows");
  if (rows.rows() != m || rows.cols() != m)
    throw Error(ErrorKind::DimensionMismatch, "field 'rows' is " + std::to_string(rows.rows()) + "x" +
                                                  std::to_string(rows.cols()) + " but 'm' is " +
                                                  std::to_string(m));
  return TransitionMatrix(std::move(rows));
}

json to_json(const LocationDistribution& dist) {
  return json{{"probs", std::vector<double>(dist.probs().begin(), dist.probs().end())}};
}

LocationDistribution location_distribution_from_json(const json& j) {
  return LocationDistribution(get_field<std::vector<double>>(j, "probs"));
}

json to_json(const CountStream& stream) {
  return json{{"kind", to_string(stream.kind())},
              {"T", stream.steps()},
              {"m", stream.locations()},
              {"values", to_json(stream.values())}};
}

CountStream count_stream_from_json(const json& j) {
  const auto kind = get_field<std::string>(j, "kind");
  const std::size_t steps = get_count(j, "T");
  const std::size_t m = get_count(j, "m");
  Matrix values = matrix_from_json(require(j, "values"), "values");
  if (values.rows() != steps || values.cols() != m)
    throw Error(ErrorKind::ShapeMismatch, "field 'values' is " + std::to_string(values.rows()) + "x" +
                                              std::to_string(values.cols()) + " but T=" +
                                              std::to_string(steps) + ", m=" + std::to_string(m));
  if (kind == "true") return CountStream::truth(std::move(values));
  if (kind == "noisy") return CountStream::noisy(std::move(values));
  if (kind == "estimate") {
    if (values.rows() == 0) throw Error(ErrorKind::InvalidArgument, "estimate stream is empty");
    double n = 0.0;
    for (double v : values.row(0)) n += v;
    // populations are head counts; snap the recovered total to it
    if (std::abs(std::round(n) - n) <= kConstraintTol) n = std::round(n);
    return CountStream::estimate(std::move(values), n);
  }
  throw Error(ErrorKind::Parse, "field 'kind' must be true, noisy or estimate, got '" + kind + "'");
}

json to_json(const PrivacyParams& params) {
  return json{{"sensitivity", params.sensitivity()},
              {"budget", params.budget()},
              {"mode", to_string(params.mode())},
              {"scale_multiplier", params.scale_multiplier()},
              {"lambda", params.lambda()}};
}

PrivacyParams privacy_params_from_json(const json& j) {
  const double multiplier = j.contains("scale_multiplier") ? get_field<double>(j, "scale_multiplier") : 1.0;
  const PrivacyMode mode = j.contains("mode") ? parse_privacy_mode(get_field<std::string>(j, "mode"))
                                              : PrivacyMode::PlainDp;
  return PrivacyParams(get_field<double>(j, "sensitivity"), get_field<double>(j, "budget"), mode, multiplier);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace dpcorr
