#pragma once

// Utility and plausibility metrics for released streams.

#include <cstddef>
#include <span>
#include <vector>

#include "dpcorr/core_model.hpp"

namespace dpcorr {

/// Mean over all T*m cells of (estimate - truth)^2.
double mse(const CountStream& estimate, const CountStream& truth);

inline constexpr double kPlausibilityCutoff = 1e-10;
inline constexpr std::size_t kFlowLimit = 1'000'000;

/// Pr(next | current) for integer count vectors under independent users moving
/// by `tm`: the sum over all m x m flow matrices F with row sums `current` and
/// column sums `next` of prod_i multinomial(current_i; F_i) prod_j tm(i,j)^F_ij.
double transition_probability(std::span<const double> current, std::span<const double> next,
                              const TransitionMatrix& tm);

/// Element t is Pr(R^{t+1} | R^t). The stream must hold nonnegative integers.
std::vector<double> stepwise_plausibility(const CountStream& stream, const TransitionMatrix& tm);

std::size_t plausibility_violations(std::span<const double> plausibility, double cutoff = kPlausibilityCutoff);

/// Sum-preserving integer rounding of every row (largest remainder).
CountStream round_stream(const CountStream& stream, long long population);

}  // namespace dpcorr
