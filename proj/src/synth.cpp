#include "dpcorr/synth.hpp"

namespace dpcorr {

Trajectories::Trajectories(std::size_t users, std::size_t steps, std::vector<std::uint32_t> locations)
    : users_(users), steps_(steps), locations_(std::move(locations)) {
  if (users == 0 || steps == 0) throw Error(ErrorKind::InvalidArgument, "trajectories need n >= 1 and T >= 1");
  if (locations_.size() != users * steps)
    throw Error(ErrorKind::ShapeMismatch, "trajectory storage holds " + std::to_string(locations_.size()) +
                                              " entries, expected " + std::to_string(users * steps));
}

std::size_t sample_categorical(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t l = 0; l < probs.size(); ++l) {
    if (probs[l] <= 0.0) continue;
    cumulative += probs[l];
    last_positive = l;
    if (u < cumulative) return l;
  }
  // u landed in the rounding slack above the final cumulative sum
  return last_positive;
}

namespace {

void check_generation(const TransitionMatrix& tm, std::size_t users, std::size_t steps,
                      const LocationDistribution& initial) {
  if (users == 0) throw Error(ErrorKind::InvalidArgument, "need n >= 1 users");
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, "need T >= 1 timesteps");
  if (initial.size() != tm.size())
    throw Error(ErrorKind::DimensionMismatch, "initial distribution has " + std::to_string(initial.size()) +
                                                  " locations, matrix has " + std::to_string(tm.size()));
}

void walk_user(const TransitionMatrix& tm, std::size_t steps, const LocationDistribution& initial,
               std::uint64_t seed, std::size_t user, std::uint32_t* out) {
  CounterRng rng(derive_key(seed, StreamDomain::Trajectory, user));
  auto loc = sample_categorical(initial.probs(), rng.uniform_open());
  out[0] = static_cast<std::uint32_t>(loc);
  for (std::size_t t = 1; t < steps; ++t) {
    loc = sample_categorical(tm.row(loc), rng.uniform_open());
    out[t] = static_cast<std::uint32_t>(loc);
  }
}

}  // namespace

Trajectories generate_trajectories_serial(const TransitionMatrix& tm, std::size_t users, std::size_t steps,
                                          const LocationDistribution& initial, RandomSeed seed) {
  check_generation(tm, users, steps, initial);
  std::vector<std::uint32_t> locations(users * steps);
  for (std::size_t u = 0; u < users; ++u) walk_user(tm, steps, initial, seed.value, u, &locations[u * steps]);
  return Trajectories(users, steps, std::move(locations));
}

Trajectories generate_trajectories(const TransitionMatrix& tm, std::size_t users, std::size_t steps,
                                   const LocationDistribution& initial, RandomSeed seed) {
  check_generation(tm, users, steps, initial);
  std::vector<std::uint32_t> locations(users * steps);
  const auto count = static_cast<std::ptrdiff_t>(users);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t u = 0; u < count; ++u) {
    const auto user = static_cast<std::size_t>(u);
    walk_user(tm, steps, initial, seed.value, user, &locations[user * steps]);
  }
  return Trajectories(users, steps, std::move(locations));
}

CountStream count_query(const Trajectories& trajectories, std::size_t locations) {
  if (locations == 0) throw Error(ErrorKind::InvalidArgument, "need m >= 1 locations");
  Matrix counts(trajectories.steps(), locations);
  for (std::size_t u = 0; u < trajectories.users(); ++u) {
    for (std::size_t t = 0; t < trajectories.steps(); ++t) {
      const std::uint32_t loc = trajectories.at(u, t);
      if (loc >= locations)
        throw Error(ErrorKind::IndexOutOfRange, "user " + std::to_string(u) + " at t=" + std::to_string(t) +
                                                    " is at location " + std::to_string(loc) + " >= m=" +
                                                    std::to_string(locations));
      counts(t, loc) += 1.0;
    }
  }
  return CountStream::truth(std::move(counts));
}

json to_json(const Trajectories& trajectories) {
  json users = json::array();
  for (std::size_t u = 0; u < trajectories.users(); ++u) {
    json row = json::array();
    for (std::size_t t = 0; t < trajectories.steps(); ++t) row.push_back(trajectories.at(u, t));
    users.push_back(std::move(row));
  }
  return json{{"n", trajectories.users()}, {"T", trajectories.steps()}, {"locations", std::move(users)}};
}

Trajectories trajectories_from_json(const json& j) {
  try {
    const auto users = j.at("n").get<std::size_t>();
    const auto steps = j.at("T").get<std::size_t>();
    const auto& rows = j.at("locations");
    if (!rows.is_array() || rows.size() != users)
      throw Error(ErrorKind::ShapeMismatch, "field 'locations' must hold n=" + std::to_string(users) + " rows");
    std::vector<std::uint32_t> locations;
    locations.reserve(users * steps);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != steps)
        throw Error(ErrorKind::ShapeMismatch, "field 'locations' rows must hold T=" + std::to_string(steps) +
                                                  " entries");
      for (const auto& v : row) locations.push_back(v.get<std::uint32_t>());
    }
    return Trajectories(users, steps, std::move(locations));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("trajectories: ") + e.what());
  }
}

}  // namespace dpcorr
