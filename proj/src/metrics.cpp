#include "dpcorr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpcorr/solver.hpp"

namespace dpcorr {

double mse(const CountStream& estimate, const CountStream& truth) {
  if (estimate.steps() != truth.steps() || estimate.locations() != truth.locations())
    throw Error(ErrorKind::ShapeMismatch,
                "estimate is " + std::to_string(estimate.steps()) + "x" + std::to_string(estimate.locations()) +
                    ", truth is " + std::to_string(truth.steps()) + "x" + std::to_string(truth.locations()));
  const auto a = estimate.values().data();
  const auto b = truth.values().data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

namespace {

std::vector<unsigned> as_counts(std::span<const double> row, std::string_view what) {
  std::vector<unsigned> out(row.size());
  for (std::size_t l = 0; l < row.size(); ++l) {
    const double v = row[l];
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e9)
      throw Error(ErrorKind::NonIntegerStream, std::string(what) + " entry " + std::to_string(l) +
                                                   " is not a nonnegative integer");
    out[l] = static_cast<unsigned>(v);
  }
  return out;
}

class FlowEnumerator {
 public:
  FlowEnumerator(const std::vector<unsigned>& rows, const TransitionMatrix& tm)
      : rows_(rows), tm_(tm), flow_(rows.size() * rows.size(), 0) {
    unsigned n = 0;
    for (unsigned r : rows) n = std::max(n, r);
    log_factorial_.resize(n + 1, 0.0);
    for (unsigned k = 2; k <= n; ++k) log_factorial_[k] = log_factorial_[k - 1] + std::log(static_cast<double>(k));
  }

  double run(std::vector<unsigned> capacity) { return visit_row(0, capacity); }

 private:
  std::size_t m() const { return rows_.size(); }

  double visit_row(std::size_t i, std::vector<unsigned>& capacity) {
    if (i + 1 == m()) {
      // the last row takes the remaining capacity; equal totals make it fit exactly
      for (std::size_t j = 0; j < m(); ++j) flow_[i * m() + j] = capacity[j];
      return row_weight(i);
    }
    return visit_cell(i, 0, rows_[i], capacity);
  }

  double visit_cell(std::size_t i, std::size_t j, unsigned left, std::vector<unsigned>& capacity) {
    if (j + 1 == m()) {
      if (left > capacity[j]) return 0.0;
      flow_[i * m() + j] = left;
      const double w = row_weight(i);
      if (w == 0.0) return 0.0;
      capacity[j] -= left;
      const double rest = visit_row(i + 1, capacity);
      capacity[j] += left;
      return w * rest;
    }
    double total = 0.0;
    const unsigned top = std::min(left, capacity[j]);
    for (unsigned f = 0; f <= top; ++f) {
      flow_[i * m() + j] = f;
      capacity[j] -= f;
      total += visit_cell(i, j + 1, left - f, capacity);
      capacity[j] += f;
    }
    return total;
  }

  // multinomial(rows_i; F_i) * prod_j tm(i, j)^F_ij
  double row_weight(std::size_t i) const {
    double log_w = log_factorial_[rows_[i]];
    for (std::size_t j = 0; j < m(); ++j) {
      const unsigned f = flow_[i * m() + j];
      if (f == 0) continue;
      const double p = tm_(i, j);
      if (p == 0.0) return 0.0;
      log_w += static_cast<double>(f) * std::log(p) - log_factorial_[f];
    }
    return std::exp(log_w);
  }

  const std::vector<unsigned>& rows_;
  const TransitionMatrix& tm_;
  std::vector<unsigned> flow_;  // m x m, row-major
  std::vector<double> log_factorial_;
};

}  // namespace

double transition_probability(std::span<const double> current, std::span<const double> next,
                              const TransitionMatrix& tm) {
  const std::size_t m = tm.size();
  if (current.size() != m || next.size() != m)
    throw Error(ErrorKind::DimensionMismatch, "count vectors must have m=" + std::to_string(m) + " entries");
  const auto a = as_counts(current, "current counts");
  const auto b = as_counts(next, "next counts");
  unsigned long long sum_a = 0, sum_b = 0;
  for (std::size_t l = 0; l < m; ++l) {
    sum_a += a[l];
    sum_b += b[l];
  }
  if (sum_a != sum_b) return 0.0;

  double bound = 1.0;
  for (unsigned ai : a) bound *= static_cast<double>(composition_count(ai, m));
  if (bound > static_cast<double>(kFlowLimit))
    throw Error(ErrorKind::InstanceTooLarge, "flow enumeration would visit up to " +
                                                 std::to_string(static_cast<long long>(bound)) + " matrices");

  FlowEnumerator enumerator(a, tm);
  return enumerator.run(b);
}

std::vector<double> stepwise_plausibility(const CountStream& stream, const TransitionMatrix& tm) {
  if (stream.locations() != tm.size())
    throw Error(ErrorKind::DimensionMismatch, "stream has m=" + std::to_string(stream.locations()) +
                                                  ", matrix has m=" + std::to_string(tm.size()));
  std::vector<double> out;
  if (stream.steps() < 2) return out;
  out.reserve(stream.steps() - 1);
  for (std::size_t t = 0; t + 1 < stream.steps(); ++t)
    out.push_back(transition_probability(stream.row(t), stream.row(t + 1), tm));
  return out;
}

std::size_t plausibility_violations(std::span<const double> plausibility, double cutoff) {
  return static_cast<std::size_t>(
      std::count_if(plausibility.begin(), plausibility.end(), [cutoff](double p) { return p < cutoff; }));
}

CountStream round_stream(const CountStream& stream, long long population) {
  Matrix values(stream.steps(), stream.locations());
  for (std::size_t t = 0; t < stream.steps(); ++t) {
    const auto rounded = largest_remainder(stream.row(t), population);
    std::copy(rounded.begin(), rounded.end(), values.row(t).begin());
  }
  return CountStream::estimate(std::move(values), static_cast<double>(population));
}

}  // namespace dpcorr
