#pragma once

// Ground-truth generation: independent users walking a Markov chain, and the
// per-timestep location count query over their trajectories.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpcorr/core_model.hpp"
#include "dpcorr/mechanism.hpp"

namespace dpcorr {

// users x T matrix of location indices.
class Trajectories {
 public:
  Trajectories(std::size_t users, std::size_t steps, std::vector<std::uint32_t> locations);

  std::size_t users() const noexcept { return users_; }
  std::size_t steps() const noexcept { return steps_; }
  std::uint32_t at(std::size_t user, std::size_t t) const { return locations_[user * steps_ + t]; }
  const std::vector<std::uint32_t>& locations() const noexcept { return locations_; }

  friend bool operator==(const Trajectories&, const Trajectories&) = default;

 private:
  std::size_t users_;
  std::size_t steps_;
  std::vector<std::uint32_t> locations_;
};

/// Index of the category selected by u in [0, 1) under cumulative-sum inversion.
std::size_t sample_categorical(std::span<const double> probs, double u);

/// User u draws from CounterRng(derive_key(seed, Trajectory, u)): one draw for the
/// initial location, then one per transition. Users run in parallel.
Trajectories generate_trajectories(const TransitionMatrix& tm, std::size_t users, std::size_t steps,
                                   const LocationDistribution& initial, RandomSeed seed);

Trajectories generate_trajectories_serial(const TransitionMatrix& tm, std::size_t users, std::size_t steps,
                                          const LocationDistribution& initial, RandomSeed seed);

/// values[t][l] = number of users at location l at time t.
CountStream count_query(const Trajectories& trajectories, std::size_t locations);

json to_json(const Trajectories& trajectories);
Trajectories trajectories_from_json(const json& j);

}  // namespace dpcorr
