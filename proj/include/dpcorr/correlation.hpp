#pragma once

// Markov-chain machinery: prior policies for the first timestep, forward
// propagation of the per-user location distribution, and Laplacian smoothing
// of a base matrix toward uniform rows.

#include <cstddef>
#include <span>
#include <vector>

#include "dpcorr/core_model.hpp"

namespace dpcorr {

/// Row-vector times matrix: next[j] = sum_i prev[i] * tm(i, j).
LocationDistribution propagate(const LocationDistribution& prev, const TransitionMatrix& tm);

/// Distribution for t = 1. The frequency policy clamps negative noisy counts
/// to zero before normalizing and falls back to uniform when nothing is left.
LocationDistribution prior_distribution(PriorPolicy policy, std::span<const double> noisy_first,
                                        std::size_t population);

/// Element 0 is the prior; element t is propagate(element t-1, tm).
std::vector<LocationDistribution> propagate_all(const LocationDistribution& prior,
                                                const TransitionMatrix& tm, std::size_t steps);

/// Row-wise (p_ij + s) / sum_j (p_ij + s). Smaller s keeps stronger correlations.
TransitionMatrix smooth_correlations(const TransitionMatrix& base, double s);

}  // namespace dpcorr
