#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dpcorr/correlation.hpp"
#include "dpcorr/synth.hpp"

using namespace dpcorr;

namespace {

const std::vector<std::vector<double>> kBase = {{0, 0, 1}, {0.5, 0, 0.5}, {0, 1, 0}};

}  // namespace

TEST_CASE("categorical inversion") {
  const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
  CHECK(sample_categorical(p, 0.0) == 0);
  CHECK(sample_categorical(p, 0.19) == 0);
  CHECK(sample_categorical(p, 0.2) == 2);
  CHECK(sample_categorical(p, 0.69) == 2);
  CHECK(sample_categorical(p, 0.7) == 3);
  CHECK(sample_categorical(p, 0.9999999) == 3);
  const std::vector<double> tail{0.5, 0.5, 0.0};
  CHECK(sample_categorical(tail, 0.9999999999) == 1);
}

TEST_CASE("deterministic cycle") {
  // loc1 -> loc3 -> loc2 -> loc1
  const auto tm = validate_transition_matrix({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
  const auto traj = generate_trajectories(tm, 50, 12, LocationDistribution::uniform(3), RandomSeed{1});
  for (std::size_t u = 0; u < traj.users(); ++u)
    for (std::size_t t = 0; t + 1 < traj.steps(); ++t) {
      const auto here = traj.at(u, t);
      const std::uint32_t expected = here == 0 ? 2 : (here == 2 ? 1 : 0);
      CHECK(traj.at(u, t + 1) == expected);
    }
}

TEST_CASE("identity matrix keeps users in place") {
  const auto tm = validate_transition_matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto traj = generate_trajectories(tm, 30, 8, LocationDistribution::uniform(3), RandomSeed{2});
  for (std::size_t u = 0; u < traj.users(); ++u)
    for (std::size_t t = 1; t < traj.steps(); ++t) CHECK(traj.at(u, t) == traj.at(u, 0));
}

TEST_CASE("branching row splits evenly") {
  const auto tm = validate_transition_matrix(kBase);
  const std::size_t users = 100000;
  const auto traj = generate_trajectories(tm, users, 2, LocationDistribution({0, 1, 0}), RandomSeed{3});
  std::size_t at_first = 0;
  for (std::size_t u = 0; u < users; ++u) at_first += traj.at(u, 1) == 0;
  CHECK(std::abs(static_cast<double>(at_first) / users - 0.5) <= 0.01);
}

TEST_CASE("count query examples") {
  const Trajectories one(1, 3, {0, 0, 0});
  CHECK(count_query(one, 2).values() == Matrix::from_rows({{1, 0}, {1, 0}, {1, 0}}));
  const Trajectories swap(2, 4, {0, 1, 0, 1, 1, 0, 1, 0});
  CHECK(count_query(swap, 2).values() == Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}}));
  CHECK_THROWS_AS(count_query(Trajectories(1, 1, {5}), 2), Error);
}

TEST_CASE("rows conserve the population") {
  const auto tm = smooth_correlations(validate_transition_matrix(kBase), 0.1);
  const auto counts = count_query(generate_trajectories(tm, 137, 60, LocationDistribution::uniform(3), RandomSeed{4}), 3);
  CHECK(counts.kind() == StreamKind::True);
  for (std::size_t t = 0; t < counts.steps(); ++t) {
    const auto row = counts.row(t);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == 137.0);
  }
}

TEST_CASE("normalized counts track the propagated distribution") {
  const auto tm = smooth_correlations(validate_transition_matrix(kBase), 0.05);
  const LocationDistribution initial({0.6, 0.3, 0.1});
  const std::size_t users = 10000, steps = 15, seeds = 10;
  const auto expected = propagate_all(initial, tm, steps);
  Matrix mean(steps, 3);
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto counts = count_query(generate_trajectories(tm, users, steps, initial, RandomSeed{seed}), 3);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t l = 0; l < 3; ++l) mean(t, l) += counts(t, l) / static_cast<double>(users * seeds);
  }
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t l = 0; l < 3; ++l) {
      const double p = expected[t][l];
      const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(users * seeds));
      CHECK(std::abs(mean(t, l) - p) <= 3.0 * sigma + 1e-12);
      CHECK(std::abs(mean(t, l) - p) <= 0.01);
    }
}

TEST_CASE("parallel generation matches the serial reference") {
  const auto tm = smooth_correlations(validate_transition_matrix(kBase), 0.01);
  const auto a = generate_trajectories(tm, 500, 40, LocationDistribution::uniform(3), RandomSeed{77});
  const auto b = generate_trajectories_serial(tm, 500, 40, LocationDistribution::uniform(3), RandomSeed{77});
  CHECK(a == b);
  CHECK_FALSE(a == generate_trajectories(tm, 500, 40, LocationDistribution::uniform(3), RandomSeed{78}));
}

TEST_CASE("trajectory json round trip") {
  const auto tm = validate_transition_matrix(kBase);
  const auto traj = generate_trajectories(tm, 7, 5, LocationDistribution::uniform(3), RandomSeed{8});
  CHECK(trajectories_from_json(json::parse(to_json(traj).dump())) == traj);
}
