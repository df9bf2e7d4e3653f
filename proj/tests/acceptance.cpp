// Acceptance suite: runs each acceptance criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dpcorr/correlation.hpp"
#include "dpcorr/harness.hpp"
#include "dpcorr/mechanism.hpp"
#include "dpcorr/metrics.hpp"
#include "dpcorr/solver.hpp"
#include "dpcorr/synth.hpp"
#include "oracles.hpp"

using namespace dpcorr;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("%s criterion %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const std::string& id, const std::string& detail) {
  std::printf("INFO criterion %s: %s\n", id.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::vector<std::vector<double>> kBase = {{0, 0, 1}, {0.5, 0, 0.5}, {0, 1, 0}};

ExperimentConfig base_config() {
  ExperimentConfig c(validate_transition_matrix(kBase));
  c.steps = {500};
  c.n_users = 200;
  c.runs = 50;
  c.seed_base = 20240601;
  return c;
}

double standard_error(const PointMean& pm) { return pm.sd_mse / std::sqrt(static_cast<double>(pm.runs)); }

// ---------------------------------------------------------------------------

struct SweepRun {
  ExperimentConfig config;
  SweepResult result;
  std::vector<SweepPoint> points;
  double seconds;
};

SweepRun run(const ExperimentConfig& config) {
  const auto start = Clock::now();
  auto result = run_sweep(config);
  return {config, std::move(result), sweep_points(config), seconds_since(start)};
}

void criterion_1(const SweepRun& eps) {
  // the budget = 0.2 point of the budget sweep
  const auto& pt = eps.points.front();
  const auto& map = eps.result.mean(Method::MapFrequency, pt.index);
  const auto& base = eps.result.mean(Method::BaselineMle, pt.index);
  const double ratio = base.mean_mse / map.mean_mse;
  report("1", map.mean_mse <= base.mean_mse / 10.0,
         "budget=" + fmt(pt.budget) + " s=0 T=500 n=200 runs=50: map_frequency MSE " + fmt(map.mean_mse) +
             ", baseline_mle MSE " + fmt(base.mean_mse) + ", improvement " + fmt(ratio) + "x (need >= 10x)");
  info("1", std::string("100x improvement ") + (ratio >= 100.0 ? "met" : "not met") + " (measured " + fmt(ratio) +
                "x); full budget sweep took " + fmt(eps.seconds, 3) + " s");
}

void criterion_2(const SweepRun& eps) {
  bool pass = true;
  std::string detail;
  for (Method method : eps.config.methods) {
    std::string series;
    double worst = 0.0;
    for (std::size_t k = 0; k < eps.points.size(); ++k) {
      const double cur = eps.result.mean(method, k).mean_mse;
      series += (k ? "," : "") + fmt(cur, 3);
      if (k > 0) {
        const double prev = eps.result.mean(method, k - 1).mean_mse;
        worst = std::max(worst, cur / prev);
        if (cur > 1.10 * prev) pass = false;
      }
    }
    detail += std::string(to_string(method)) + " max step ratio " + fmt(worst, 4) + " [" + series + "]; ";
  }
  report("2", pass, "mean MSE non-increasing in budget within 10%: " + detail);
}

void criterion_3(const SweepRun& corr) {
  // points are ordered by s: 0.01, 0.1, 1
  const auto& strong = corr.result.mean(Method::MapFrequency, 0);
  const auto& mid = corr.result.mean(Method::MapFrequency, 1);
  const auto& weak = corr.result.mean(Method::MapFrequency, 2);
  const double gap1 = mid.mean_mse - strong.mean_mse;
  const double gap2 = weak.mean_mse - mid.mean_mse;
  const double band1 = 3.0 * std::hypot(standard_error(strong), standard_error(mid));
  const double band2 = 3.0 * std::hypot(standard_error(mid), standard_error(weak));
  const bool ordering = gap1 > band1 && gap2 > band2;

  const double base = corr.result.mean(Method::BaselineMle, 2).mean_mse;
  bool within = true;
  std::string ratios;
  for (Method method : {Method::MapFrequency, Method::MapUniform}) {
    const double r = corr.result.mean(method, 2).mean_mse / base;
    ratios += std::string(to_string(method)) + "/baseline=" + fmt(r) + " ";
    if (!(r <= 2.0 && r >= 0.5)) within = false;
  }
  report("3", ordering && within,
         "budget=1 map_frequency MSE s=0.01:" + fmt(strong.mean_mse) + " s=0.1:" + fmt(mid.mean_mse) +
             " s=1:" + fmt(weak.mean_mse) + "; gaps " + fmt(gap1) + " vs 3sigma " + fmt(band1) + ", " + fmt(gap2) +
             " vs 3sigma " + fmt(band2) + (ordering ? " (ordered)" : " (NOT ordered beyond 3sigma)") +
             "; at s=1 " + ratios + (within ? "(within 2x)" : "(NOT within 2x)"));
}

void criterion_4(const std::vector<const SweepRun*>& sweeps) {
  bool dominance = true, variance = true;
  std::size_t points = 0;
  double worst_dom = 0.0, worst_var = 0.0;
  for (const SweepRun* s : sweeps) {
    for (const auto& pt : s->points) {
      ++points;
      const auto& raw = s->result.mean(Method::RawNoisy, pt.index);
      for (Method method : s->config.methods) {
        if (method == Method::RawNoisy) continue;
        const double r = s->result.mean(method, pt.index).mean_mse / raw.mean_mse;
        worst_dom = std::max(worst_dom, r);
        if (r > 1.0) dominance = false;
      }
      const double lambda = PrivacyParams(s->config.sensitivity, pt.budget, s->config.budget_mode,
                                          s->config.scale_multiplier)
                                .lambda();
      const double rel = std::abs(raw.mean_mse - 2.0 * lambda * lambda) / (2.0 * lambda * lambda);
      worst_var = std::max(worst_var, rel);
      if (rel > 0.05) variance = false;
    }
  }
  report("4", dominance && variance,
         std::to_string(points) + " sweep points: worst post-processed/raw MSE ratio " + fmt(worst_dom) +
             " (need <= 1); worst |raw MSE - 2 lambda^2| / 2 lambda^2 " + fmt(worst_var) + " (need <= 0.05)");
}

void criterion_5() {
  const auto start = Clock::now();
  std::mt19937_64 rng(555);
  std::size_t instances = 0, steps_checked = 0, worse = 0;
  double worst_gap = -INFINITY;
  for (; instances < 200; ++instances) {
    const std::size_t m = 2 + instances % 2;
    const std::size_t n = 1 + (instances / 2) % 6;
    const double budget = instances % 4 < 2 ? 0.2 : 1.0;
    const std::size_t steps = 3;
    const auto tm = validate_transition_matrix(oracle::random_stochastic(m, rng));
    const auto seed = RandomSeed{rng()};
    const auto truth = count_query(generate_trajectories(tm, n, steps, LocationDistribution::uniform(m), seed), m);
    const PrivacyParams params(1.0, budget);
    const auto noisy = release_stream(truth, params, seed);
    auto probs = propagate_all(prior_distribution(PriorPolicy::Frequency, noisy.row(0), n), tm, steps);
    const ObjectiveSpec spec(params.lambda(), std::move(probs), noisy, static_cast<double>(n));
    SolverConfig config;
    config.round_mode = RoundMode::LargestRemainder;
    const auto res = solve_map(spec, config);
    for (std::size_t t = 0; t < steps; ++t, ++steps_checked) {
      const double gap = res.report.steps[t].objective - brute_force_oracle(spec, t).objective;
      worst_gap = std::max(worst_gap, gap);
      if (gap > 1e-6) ++worse;
    }
  }
  const double secs = seconds_since(start);
  report("5", worse == 0 && secs < 60.0,
         std::to_string(instances) + " instances (" + std::to_string(steps_checked) +
             " timesteps): max(solver - oracle) objective " + fmt(worst_gap) + " (need <= 1e-6), " +
             std::to_string(worse) + " worse than oracle; " + fmt(secs, 3) + " s (need < 60 s)");
}

SweepRun plausibility_sweep() {
  ExperimentConfig c(validate_transition_matrix({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}));
  c.smoothing_s = {0.0};
  c.budgets = {0.2};
  c.steps = {20};
  c.n_users = 1;
  c.runs = 50;
  c.seed_base = 777;
  c.methods = {Method::MapFrequency, Method::BaselineMle};
  c.plausibility_max_users = 5;
  return run(c);
}

void criterion_6(const SweepRun& pl) {
  std::size_t baseline_worse = 0, map_clean = 0;
  for (std::size_t r = 0; r < pl.config.runs; ++r) {
    const SweepRow* map = nullptr;
    const SweepRow* base = nullptr;
    for (const auto& row : pl.result.rows) {
      if (row.run != r) continue;
      if (row.method == Method::MapFrequency) map = &row;
      if (row.method == Method::BaselineMle) base = &row;
    }
    if (*base->plausibility_violations > *map->plausibility_violations) ++baseline_worse;
    if (*map->plausibility_violations == 0) ++map_clean;
  }
  report("6", baseline_worse >= 45 && map_clean >= 45,
         "deterministic cycle n=1 T=20 budget=0.2, 50 runs: baseline_mle has more violations in " +
             std::to_string(baseline_worse) + " runs (need >= 45); map_frequency has 0 violations in " +
             std::to_string(map_clean) + " runs (need >= 45); mean violations map " +
             fmt(*pl.result.mean(Method::MapFrequency, 0).mean_plausibility_violations) + ", baseline " +
             fmt(*pl.result.mean(Method::BaselineMle, 0).mean_plausibility_violations));
}

// ---------------------------------------------------------------------------
// criterion 7: numerical and invariant suite

ObjectiveSpec random_spec(std::mt19937_64& rng, std::size_t m, std::size_t steps, double n, double lambda,
                          LogFactorialMode mode) {
  const auto tm = validate_transition_matrix(oracle::random_stochastic(m, rng));
  auto probs = propagate_all(LocationDistribution(oracle::random_distribution(m, rng)), tm, steps);
  std::exponential_distribution<double> expo(1.0 / lambda);
  std::bernoulli_distribution coin(0.5);
  Matrix noisy(steps, m);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t l = 0; l < m; ++l) noisy(t, l) = n * probs[t][l] + (coin(rng) ? 1 : -1) * expo(rng);
  return ObjectiveSpec(lambda, std::move(probs), CountStream::noisy(noisy), n, mode);
}

void criterion_7a() {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = 2 + i % 4;
    const double n = 3 + 20 * unit(rng);
    std::vector<double> x(m), noisy(m);
    for (std::size_t l = 0; l < m; ++l) {
      x[l] = 0.5 + n * unit(rng);
      noisy[l] = x[l] + (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 5 * unit(rng));
    }
    const ObjectiveSpec spec(0.3 + 3 * unit(rng), {LocationDistribution(oracle::random_distribution(m, rng))},
                             CountStream::noisy(Matrix::from_rows({noisy})), n,
                             i % 2 ? LogFactorialMode::Stirling : LogFactorialMode::ExactLogGamma);
    const auto g = subgradient(x, spec, 0);
    const auto fd =
        oracle::central_difference([&](const std::vector<double>& y) { return step_objective(y, spec, 0); }, x, 1e-5);
    for (std::size_t l = 0; l < m; ++l) worst = std::max(worst, std::abs(g[l] - fd[l]) / std::max(1.0, std::abs(fd[l])));
  }
  report("7a", worst <= 1e-4, "gradient vs central differences at 100 interior points: max relative error " +
                                  fmt(worst) + " (need <= 1e-4)");
}

void criterion_7b() {
  std::mt19937_64 rng(72);
  double worst_residual = 0.0, min_entry = INFINITY;
  std::size_t solves = 0;
  auto observe = [&](const CountStream& est, double n) {
    for (std::size_t t = 0; t < est.steps(); ++t) {
      const auto row = est.row(t);
      worst_residual = std::max(worst_residual, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - n));
      min_entry = std::min(min_entry, *std::min_element(row.begin(), row.end()));
    }
  };
  for (int i = 0; i < 60; ++i) {
    const std::size_t m = 2 + i % 5;
    const double n = 1 + 7 * (i % 30);
    for (auto mode : {LogFactorialMode::ExactLogGamma, LogFactorialMode::Stirling}) {
      const auto spec = random_spec(rng, m, 5, n, i % 2 ? 5.0 : 0.5, mode);
      for (auto round : {RoundMode::None, RoundMode::LargestRemainder})
        for (auto algorithm : {SolverAlgorithm::Auto, SolverAlgorithm::Subgradient}) {
          SolverConfig config;
          config.round_mode = round;
          config.algorithm = algorithm;
          config.max_iters = 500;
          observe(solve_map(spec, config).estimate, n);
          ++solves;
        }
      observe(solve_baseline_mle(spec.noisy, spec.lambda, n), n);
      ++solves;
    }
  }
  report("7b", worst_residual <= 1e-6 && min_entry >= 0.0,
         std::to_string(solves) + " solver outputs: max |row sum - n| " + fmt(worst_residual) +
             " (need <= 1e-6), min entry " + fmt(min_entry) + " (need >= 0)");
}

void criterion_7c() {
  std::mt19937_64 rng(73);
  bool equal = true;
  for (auto mode : {LogFactorialMode::ExactLogGamma, LogFactorialMode::Stirling}) {
    const auto spec = random_spec(rng, 3, 30, 40, 2.0, mode);
    SolverConfig config;
    config.seed = 17;
    const auto whole = solve_map(spec, config);
    for (std::size_t t = 0; t < spec.steps(); ++t) {
      const auto single = solve_step(spec, t, config);
      const auto row = whole.estimate.row(t);
      if (!std::equal(row.begin(), row.end(), single.estimate.begin(), single.estimate.end())) equal = false;
    }
  }
  report("7c", equal, "whole-stream solve vs per-step solves, 2 x 30 timesteps: bit-identical " +
                          std::string(equal ? "yes" : "no"));
}

void criterion_7d() {
  std::mt19937_64 rng(74);
  double worst = 0.0, min_p = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = 2 + i % 9;
    const auto next = propagate(LocationDistribution(oracle::random_distribution(m, rng)),
                                validate_transition_matrix(oracle::random_stochastic(m, rng)));
    double sum = 0.0;
    for (double p : next.probs()) {
      sum += p;
      min_p = std::min(min_p, p);
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  report("7d", worst <= 1e-9 && min_p >= 0.0,
         "1000 random propagations: max |sum - 1| " + fmt(worst) + ", min entry " + fmt(min_p));
}

void criterion_7e() {
  std::mt19937_64 rng(75);
  bool identity = true;
  double worst = 0.0;
  std::vector<TransitionMatrix> bases{validate_transition_matrix(kBase)};
  for (int i = 0; i < 20; ++i) bases.push_back(validate_transition_matrix(oracle::random_stochastic(2 + i % 6, rng)));
  for (const auto& b : bases) {
    if (!(smooth_correlations(b, 0.0) == b)) identity = false;
    const auto u = smooth_correlations(b, 1e9);
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) worst = std::max(worst, std::abs(u(i, j) - 1.0 / b.size()));
  }
  report("7e", identity && worst <= 1e-6,
         std::string("smoothing at s=0 is the identity: ") + (identity ? "yes" : "no") +
             "; max |entry - 1/m| at s=1e9 " + fmt(worst) + " (need <= 1e-6)");
}

void criterion_7f() {
  std::mt19937_64 rng(76);
  double worst = 0.0;
  std::size_t points = 0;
  for (unsigned n = 1; n <= 12; ++n)
    for (std::size_t m : {2, 3, 4}) {
      const auto p = oracle::random_distribution(m, rng);
      const LocationDistribution dist(p);
      oracle::for_each_composition(n, m, [&](const std::vector<unsigned>& r) {
        const std::vector<double> x(r.begin(), r.end());
        const double diff = std::abs(prior_term(x, dist, n, LogFactorialMode::ExactLogGamma) +
                                     std::log(oracle::multinomial_pmf(r, p)));
        worst = std::max(worst, diff);
        ++points;
      });
    }
  report("7f", worst <= 1e-9, "exact log-gamma prior vs direct multinomial pmf at " + std::to_string(points) +
                                  " integer points, n <= 12: max difference " + fmt(worst) + " (need <= 1e-9)");
}

void criterion_7g() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    const std::size_t m = 2 + i % 3;
    const unsigned n = 1 + i % 5;
    const auto tm = validate_transition_matrix(oracle::random_stochastic(m, rng));
    std::vector<double> current(m, 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (unsigned k = 0; k < n; ++k) current[pick(rng)] += 1;
    double total = 0.0;
    oracle::for_each_composition(n, m, [&](const std::vector<unsigned>& r) {
      total += transition_probability(current, std::vector<double>(r.begin(), r.end()), tm);
    });
    worst = std::max(worst, std::abs(total - 1.0));
  }
  report("7g", worst <= 1e-9, "stepwise plausibility summed over next states, 60 instances: max |sum - 1| " +
                                  fmt(worst) + " (need <= 1e-9)");
}

void criterion_7h(const SweepRun& pl) {
  ExperimentConfig small = base_config();
  small.budgets = {0.2, 1.0};
  small.runs = 5;
  const auto a = run_sweep(small, 1);
  const auto b = run_sweep(small);
  const auto again = run_sweep(pl.config);
  const bool same = format_rows_csv(a) == format_rows_csv(b) && format_means_csv(a) == format_means_csv(b) &&
                    format_rows_csv(again) == format_rows_csv(pl.result) &&
                    format_means_csv(again) == format_means_csv(pl.result);
  report("7h", same, std::string("repeated sweeps produce byte-identical rows and means: ") + (same ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto start = Clock::now();

  ExperimentConfig eps_config = base_config();
  eps_config.smoothing_s = {0.0};
  eps_config.budgets = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
  const SweepRun eps = run(eps_config);
  if (eps.result.rows.size() != 2000) {
    report("2", false, "budget sweep produced " + std::to_string(eps.result.rows.size()) + " rows, expected 2000");
  }
  criterion_1(eps);
  criterion_2(eps);

  ExperimentConfig corr_config = base_config();
  corr_config.smoothing_s = {0.01, 0.1, 1.0};
  corr_config.budgets = {1.0};
  const SweepRun corr = run(corr_config);
  criterion_3(corr);
  criterion_4({&eps, &corr});

  criterion_5();

  const SweepRun pl = plausibility_sweep();
  criterion_6(pl);

  criterion_7a();
  criterion_7b();
  criterion_7c();
  criterion_7d();
  criterion_7e();
  criterion_7f();
  criterion_7g();
  criterion_7h(pl);

  std::printf("%d criterion line(s) failed; total %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
