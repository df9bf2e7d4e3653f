#include "dpcorr/correlation.hpp"

#include <algorithm>
#include <cmath>

namespace dpcorr {

LocationDistribution propagate(const LocationDistribution& prev, const TransitionMatrix& tm) {
  const std::size_t m = tm.size();
  if (prev.size() != m)
    throw Error(ErrorKind::DimensionMismatch, "distribution has " + std::to_string(prev.size()) +
                                                  " locations, matrix has " + std::to_string(m));
  std::vector<double> next(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double p = prev[i];
    if (p == 0.0) continue;
    const auto row = tm.row(i);
    for (std::size_t j = 0; j < m; ++j) next[j] += p * row[j];
  }
  // rows are only stochastic to kStochasticTol; keep long chains on the simplex
  double total = 0.0;
  for (double v : next) total += v;
  for (double& v : next) v /= total;
  return LocationDistribution(std::move(next));
}

LocationDistribution prior_distribution(PriorPolicy policy, std::span<const double> noisy_first,
                                        std::size_t population) {
  if (population == 0) throw Error(ErrorKind::InvalidArgument, "population must be >= 1");
  const std::size_t m = noisy_first.size();
  if (policy == PriorPolicy::Uniform) return LocationDistribution::uniform(m);

  std::vector<double> probs(m);
  double total = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    probs[l] = std::max(noisy_first[l], 0.0);
    total += probs[l];
  }
  if (!(total > 0.0)) return LocationDistribution::uniform(m);
  for (double& p : probs) p /= total;
  return LocationDistribution(std::move(probs));
}

std::vector<LocationDistribution> propagate_all(const LocationDistribution& prior,
                                                const TransitionMatrix& tm, std::size_t steps) {
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, "need T >= 1");
  if (prior.size() != tm.size())
    throw Error(ErrorKind::DimensionMismatch, "prior has " + std::to_string(prior.size()) +
                                                  " locations, matrix has " + std::to_string(tm.size()));
  std::vector<LocationDistribution> out;
  out.reserve(steps);
  out.push_back(prior);
  for (std::size_t t = 1; t < steps; ++t) out.push_back(propagate(out.back(), tm));
  return out;
}

TransitionMatrix smooth_correlations(const TransitionMatrix& base, double s) {
  if (!(s >= 0.0) || !std::isfinite(s))
    throw Error(ErrorKind::InvalidArgument, "smoothing level must be finite and >= 0");
  if (s == 0.0) return base;
  const std::size_t m = base.size();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) denom += base(i, j) + s;
    for (std::size_t j = 0; j < m; ++j) out(i, j) = (base(i, j) + s) / denom;
  }
  return TransitionMatrix(std::move(out));
}

}  // namespace dpcorr
