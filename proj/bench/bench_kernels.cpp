// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "dpcorr/correlation.hpp"
#include "dpcorr/mechanism.hpp"
#include "dpcorr/solver.hpp"
#include "dpcorr/synth.hpp"

using namespace dpcorr;

namespace {

TransitionMatrix base_matrix() { return validate_transition_matrix({{0, 0, 1}, {0.5, 0, 0.5}, {0, 1, 0}}); }

CountStream truth_counts(std::size_t steps) {
  const auto tm = base_matrix();
  return count_query(generate_trajectories_serial(tm, 200, steps, LocationDistribution::uniform(3), RandomSeed{5}),
                     3);
}

ObjectiveSpec make_spec(std::size_t steps) {
  const auto truth = truth_counts(steps);
  const PrivacyParams privacy(1.0, 0.2);
  auto noisy = release_stream_serial(truth, privacy, RandomSeed{6});
  const auto& raw = noisy.values();
  std::vector<double> first(raw.cols());
  for (std::size_t l = 0; l < raw.cols(); ++l) first[l] = raw(0, l);
  auto probs = propagate_all(prior_distribution(PriorPolicy::Frequency, first, 200), base_matrix(), steps);
  return ObjectiveSpec(privacy.lambda(), std::move(probs), std::move(noisy), 200.0);
}

template <bool Parallel>
void BM_generate(benchmark::State& state) {
  const auto tm = base_matrix();
  const auto users = static_cast<std::size_t>(state.range(0));
  const auto initial = LocationDistribution::uniform(3);
  for (auto _ : state) {
    auto traj = Parallel ? generate_trajectories(tm, users, 500, initial, RandomSeed{1})
                         : generate_trajectories_serial(tm, users, 500, initial, RandomSeed{1});
    benchmark::DoNotOptimize(traj);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 500);
}

template <bool Parallel>
void BM_release(benchmark::State& state) {
  const auto truth = truth_counts(static_cast<std::size_t>(state.range(0)));
  const PrivacyParams privacy(1.0, 0.2);
  for (auto _ : state) {
    auto noisy = Parallel ? release_stream(truth, privacy, RandomSeed{2})
                          : release_stream_serial(truth, privacy, RandomSeed{2});
    benchmark::DoNotOptimize(noisy);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 3);
}

template <bool Parallel>
void BM_solve(benchmark::State& state) {
  const auto spec = make_spec(static_cast<std::size_t>(state.range(0)));
  SolverConfig config;
  if (state.range(1) == 1) {
    config.algorithm = SolverAlgorithm::Subgradient;
  }
  for (auto _ : state) {
    auto result = Parallel ? solve_map(spec, config) : solve_map_serial(spec, config);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_generate<false>)->Name("generate/serial")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate<true>)->Name("generate/openmp")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_release<false>)->Name("release/serial")->Arg(500)->Arg(50000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_release<true>)->Name("release/openmp")->Arg(500)->Arg(50000)->Unit(benchmark::kMicrosecond)->UseRealTime();
// second argument: 0 = dual solver, 1 = projected subgradient
BENCHMARK(BM_solve<false>)->Name("solve_map/serial")->Args({500, 0})->Args({20, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve<true>)->Name("solve_map/openmp")->Args({500, 0})->Args({20, 1})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
