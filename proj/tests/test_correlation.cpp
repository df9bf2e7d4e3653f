#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dpcorr/correlation.hpp"
#include "oracles.hpp"

using namespace dpcorr;

namespace {

const std::vector<std::vector<double>> kBase = {{0, 0, 1}, {0.5, 0, 0.5}, {0, 1, 0}};

void check_probs(const LocationDistribution& d, std::vector<double> expected, double tol = 1e-12) {
  REQUIRE(d.size() == expected.size());
  for (std::size_t l = 0; l < expected.size(); ++l) CHECK(d[l] == doctest::Approx(expected[l]).epsilon(tol));
}

}  // namespace

TEST_CASE("propagate selects and mixes rows") {
  const auto tm = validate_transition_matrix(kBase);
  check_probs(propagate(LocationDistribution({1, 0, 0}), tm), {0, 0, 1});
  check_probs(propagate(LocationDistribution({0, 1, 0}), tm), {0.5, 0, 0.5});
  check_probs(propagate(LocationDistribution({0.5, 0.5, 0}), tm), {0.25, 0, 0.75});
  CHECK_THROWS_AS(propagate(LocationDistribution({0.5, 0.5}), tm), Error);
}

TEST_CASE("prior policies") {
  const std::vector<double> noisy{150, 30, 20};
  check_probs(prior_distribution(PriorPolicy::Uniform, noisy, 200), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  check_probs(prior_distribution(PriorPolicy::Frequency, noisy, 200), {0.75, 0.15, 0.10});
  const std::vector<double> negative{-5, -1, -2};
  check_probs(prior_distribution(PriorPolicy::Frequency, negative, 200), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const std::vector<double> mixed{-4, 3, 1};
  check_probs(prior_distribution(PriorPolicy::Frequency, mixed, 4), {0, 0.75, 0.25});
}

TEST_CASE("propagate_all chains") {
  const auto tm = validate_transition_matrix(kBase);
  const auto chain = propagate_all(LocationDistribution({1, 0, 0}), tm, 4);
  REQUIRE(chain.size() == 4);
  check_probs(chain[0], {1, 0, 0});
  check_probs(chain[1], {0, 0, 1});
  check_probs(chain[2], {0, 1, 0});
  check_probs(chain[3], {0.5, 0, 0.5});

  const LocationDistribution prior({0.2, 0.3, 0.5});
  const auto id = validate_transition_matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  for (const auto& d : propagate_all(prior, id, 3)) CHECK(d == prior);

  const double third = 1.0 / 3;
  const auto flat = validate_transition_matrix({{third, third, third}, {third, third, third}, {third, third, third}});
  for (const auto& d : propagate_all(LocationDistribution::uniform(3), flat, 2)) check_probs(d, {third, third, third});
}

TEST_CASE("smoothing examples") {
  const auto base = validate_transition_matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(smooth_correlations(base, 0.0) == base);
  const auto s1 = smooth_correlations(base, 1.0);
  CHECK(s1(0, 0) == doctest::Approx(0.5));
  CHECK(s1(0, 1) == doctest::Approx(0.25));
  CHECK(s1(0, 2) == doctest::Approx(0.25));
  const auto big = smooth_correlations(validate_transition_matrix(kBase), 1e9);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(big(i, j) - 1.0 / 3) <= 1e-6);
  CHECK_THROWS_AS(smooth_correlations(base, -0.1), Error);
}

TEST_CASE("propagate stays on the simplex") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + trial % 9;
    const auto tm = validate_transition_matrix(oracle::random_stochastic(m, rng));
    const auto next = propagate(LocationDistribution(oracle::random_distribution(m, rng)), tm);
    double sum = 0.0;
    for (double p : next.probs()) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("smoothing is monotone in uniformity") {
  std::mt19937_64 rng(99);
  std::vector<TransitionMatrix> bases{validate_transition_matrix(kBase)};
  for (int i = 0; i < 50; ++i) bases.push_back(validate_transition_matrix(oracle::random_stochastic(2 + i % 6, rng)));
  const std::vector<double> levels{0.0, 0.001, 0.01, 0.1, 0.5, 1.0, 10.0, 1e3};
  for (const auto& base : bases) {
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
      const auto lo = smooth_correlations(base, levels[k]);
      const auto hi = smooth_correlations(base, levels[k + 1]);
      for (std::size_t i = 0; i < base.size(); ++i) {
        const auto rl = lo.row(i);
        const auto rh = hi.row(i);
        CHECK(*std::max_element(rh.begin(), rh.end()) <= *std::max_element(rl.begin(), rl.end()) + 1e-15);
      }
    }
  }
}

TEST_CASE("propagate_all agrees with matrix powers") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 2 + trial % 5;
    const auto rows = oracle::random_stochastic(m, rng);
    const auto prior = oracle::random_distribution(m, rng);
    const std::size_t steps = 1 + 7 * trial;
    const auto chain = propagate_all(LocationDistribution(prior), validate_transition_matrix(rows), steps);
    REQUIRE(chain.size() == steps);
    for (std::size_t t = 0; t < steps; t += 3) {
      const auto expected = oracle::vecmat(prior, oracle::matpow(rows, t));
      for (std::size_t l = 0; l < m; ++l) CHECK(std::abs(chain[t][l] - expected[l]) <= 1e-9);
    }
  }
}
