#include "dpcorr/solver.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "dpcorr/mechanism.hpp"

namespace dpcorr {

std::string_view to_string(RoundMode mode) {
  return mode == RoundMode::None ? "none" : "largest_remainder";
}

std::string_view to_string(SolverAlgorithm algorithm) {
  switch (algorithm) {
    case SolverAlgorithm::Auto: return "auto";
    case SolverAlgorithm::Subgradient: return "subgradient";
    case SolverAlgorithm::DualBisection: return "dual_bisection";
  }
  return "unknown";
}

RoundMode parse_round_mode(std::string_view text) {
  if (text == "none") return RoundMode::None;
  if (text == "largest_remainder") return RoundMode::LargestRemainder;
  throw Error(ErrorKind::Parse, "round_mode must be none or largest_remainder, got '" + std::string(text) + "'");
}

SolverAlgorithm parse_solver_algorithm(std::string_view text) {
  if (text == "auto") return SolverAlgorithm::Auto;
  if (text == "subgradient") return SolverAlgorithm::Subgradient;
  if (text == "dual_bisection") return SolverAlgorithm::DualBisection;
  throw Error(ErrorKind::Parse, "algorithm must be auto, subgradient or dual_bisection, got '" +
                                    std::string(text) + "'");
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  if (restarts < 1) throw Error(ErrorKind::InvalidArgument, "restarts must be >= 1");
  if (!(step_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_scale must be positive");
}

json to_json(const SolverConfig& c) {
  return json{{"max_iters", c.max_iters},   {"step_scale", c.step_scale},
              {"tol", c.tol},               {"restarts", c.restarts},
              {"round_mode", to_string(c.round_mode)}, {"algorithm", to_string(c.algorithm)},
              {"seed", c.seed}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  if (!j.is_object()) throw Error(ErrorKind::Parse, "field 'solver' must be an object");
  try {
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<std::size_t>();
    if (j.contains("step_scale")) c.step_scale = j.at("step_scale").get<double>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("restarts")) c.restarts = j.at("restarts").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("round_mode")) c.round_mode = parse_round_mode(j.at("round_mode").get<std::string>());
    if (j.contains("algorithm")) c.algorithm = parse_solver_algorithm(j.at("algorithm").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("field 'solver': ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t SolveReport::nonconverged_steps() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepReport& s) { return !s.converged; }));
}

json to_json(const SolveReport& report) {
  json steps = json::array();
  for (const auto& s : report.steps)
    steps.push_back({{"objective", s.objective},
                     {"iterations", s.iterations},
                     {"residual", s.residual},
                     {"min_entry", s.min_entry},
                     {"converged", s.converged},
                     {"rounded", s.rounded}});
  return json{{"total_objective", report.total_objective},
              {"wall_ms", report.wall_ms},
              {"nonconverged_steps", report.nonconverged_steps()},
              {"steps", std::move(steps)}};
}

// ---------------------------------------------------------------------------

std::vector<double> project_simplex(std::span<const double> v, double total) {
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidArgument, "simplex total must be positive");
  if (v.empty()) throw Error(ErrorKind::InvalidArgument, "cannot project an empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - total) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) threshold = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t l = 0; l < v.size(); ++l) out[l] = std::max(v[l] - threshold, 0.0);
  return out;
}

std::vector<double> largest_remainder(std::span<const double> r, long long total) {
  std::vector<double> out(r.size());
  std::vector<double> remainder(r.size());
  long long assigned = 0;
  for (std::size_t l = 0; l < r.size(); ++l) {
    const double clamped = std::max(r[l], 0.0);
    // absorb float noise such as 2.9999999999999996
    out[l] = std::floor(clamped + 1e-9);
    remainder[l] = clamped - out[l];
    assigned += static_cast<long long>(out[l]);
  }
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  long long missing = total - assigned;
  for (std::size_t k = 0; missing > 0; k = (k + 1) % order.size(), --missing) out[order[k]] += 1.0;
  // only reachable when the input sums to more than the total
  while (missing < 0) {
    for (std::size_t k = order.size(); k-- > 0 && missing < 0;) {
      if (out[order[k]] >= 1.0) {
        out[order[k]] -= 1.0;
        ++missing;
      }
    }
  }
  return out;
}

std::size_t composition_count(std::size_t n, std::size_t m) {
  if (m == 0) return 0;
  // C(n + m - 1, m - 1), computed incrementally: exact at each step
  const std::size_t k = m - 1;
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t num = n + i;
    if (result > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
    result = result * num / i;
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

// One timestep restricted to the cells the solver may move.
struct StepProblem {
  std::vector<std::size_t> active;
  std::vector<double> noisy;
  std::vector<double> log_p;
  double population;
  double inv_lambda;
  LogFactorialMode mode;
  double floor;

  StepProblem(const ObjectiveSpec& spec, std::size_t t)
      : population(spec.population), inv_lambda(1.0 / spec.lambda), mode(spec.mode), floor(spec.floor) {
    const auto noisy_t = spec.noisy.row(t);
    const auto& probs = spec.probs[t];
    for (std::size_t l = 0; l < noisy_t.size(); ++l) {
      if (spec.hard_pin && probs[l] == 0.0) continue;
      active.push_back(l);
      noisy.push_back(noisy_t[l]);
      log_p.push_back(std::log(std::max(probs[l], spec.floor)));
    }
  }

  std::size_t size() const { return active.size(); }

  std::vector<double> expand(std::span<const double> reduced, std::size_t m) const {
    std::vector<double> full(m, 0.0);
    for (std::size_t k = 0; k < active.size(); ++k) full[active[k]] = reduced[k];
    return full;
  }

  // The pinned cells sit at 0 where they add |noisy_l| / lambda and nothing to the
  // prior, so the reduced objective differs from the full one by a constant.
  void gradient(std::span<const double> r, std::span<double> g) const {
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double diff = noisy[k] - r[k];
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      g[k] = -sign * inv_lambda - log_p[k] + log_factorial_derivative(r[k], mode, floor);
    }
  }
};

double inverse_digamma(double y) {
  if (y > 700.0) return std::numeric_limits<double>::infinity();
  constexpr double kEulerGamma = 0.57721566490153286061;
  double x = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y + kEulerGamma);
  for (int it = 0; it < 30; ++it) {
    const double step = (boost::math::digamma(x) - y) / boost::math::trigamma(x);
    double next = x - step;
    if (!(next > 0.0)) next = 0.5 * x;
    const bool done = std::abs(next - x) <= 1e-15 * x;
    x = next;
    if (done) break;
  }
  return x;
}

// Coordinate minimizer of |noisy - r|/lambda - r log_p + ln Gamma(r + 1) - mu r
// over r >= 0, and dr/dmu on the smooth branches.
struct CoordinateResponse {
  double r;
  double slope;
};

CoordinateResponse coordinate_response(double mu, double noisy, double log_p, double inv_lambda) {
  const double right = inverse_digamma(mu + log_p - inv_lambda) - 1.0;  // branch r > noisy
  const double left = inverse_digamma(mu + log_p + inv_lambda) - 1.0;   // branch r < noisy
  double r;
  bool on_branch = true;
  if (right > noisy) {
    r = right;
  } else if (left < noisy) {
    r = left;
  } else {
    r = noisy;
    on_branch = false;
  }
  if (r <= 0.0) return {0.0, 0.0};
  return {r, on_branch ? 1.0 / boost::math::trigamma(r + 1.0) : 0.0};
}

std::vector<double> dual_solve(const StepProblem& p, std::size_t& iterations) {
  const std::size_t k = p.size();
  std::vector<double> r(k);
  if (k == 1) {
    r[0] = p.population;
    iterations = 0;
    return r;
  }
  auto total_at = [&](double mu, double* slope) {
    double sum = 0.0;
    double ds = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const auto resp = coordinate_response(mu, p.noisy[l], p.log_p[l], p.inv_lambda);
      r[l] = resp.r;
      sum += resp.r;
      ds += resp.slope;
    }
    if (slope) *slope = ds;
    return sum;
  };

  const double n = p.population;
  const double target_tol = 1e-13 * std::max(1.0, n);
  double mu = std::log(n / static_cast<double>(k) + 1.0) -
              std::accumulate(p.log_p.begin(), p.log_p.end(), 0.0) / static_cast<double>(k);
  double lo = mu;
  double hi = mu;
  double step = 1.0;
  iterations = 0;
  while (total_at(lo, nullptr) > n) {
    lo -= step;
    step *= 2.0;
    ++iterations;
  }
  step = 1.0;
  while (total_at(hi, nullptr) < n) {
    hi += step;
    step *= 2.0;
    ++iterations;
  }

  mu = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    ++iterations;
    double slope = 0.0;
    const double s = total_at(mu, &slope);
    if (std::abs(s - n) <= target_tol) break;
    if (s < n) lo = mu; else hi = mu;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mu))) break;
    double next = slope > 0.0 ? mu - (s - n) / slope : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  total_at(mu, nullptr);
  return project_simplex(r, n);
}

struct DescentOutcome {
  std::vector<double> best;
  double best_value;
  std::size_t iterations;
  bool converged;
};

// Replaces g by minus the projection of -g onto the tangent cone of the simplex at x.
void tangent_direction(std::span<const double> x, std::vector<double>& g, std::vector<std::size_t>& order) {
  const std::size_t k = g.size();
  double sum = 0.0;
  std::size_t count = 0;
  order.clear();
  for (std::size_t l = 0; l < k; ++l) {
    if (x[l] > 0.0) {
      sum += g[l];
      ++count;
    } else {
      order.push_back(l);
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] < g[b]; });
  std::size_t joined = 0;
  for (; joined < order.size(); ++joined) {
    const double g_l = g[order[joined]];
    if (count > 0 && g_l >= sum / static_cast<double>(count)) break;
    sum += g_l;
    ++count;
  }
  const double mu = sum / static_cast<double>(count);
  for (std::size_t l = 0; l < k; ++l) g[l] -= mu;
  for (std::size_t j = joined; j < order.size(); ++j) g[order[j]] = 0.0;
}

DescentOutcome projected_subgradient(const StepProblem& p, std::vector<double> x, const SolverConfig& config,
                                     const std::function<double(std::span<const double>)>& f,
                                     std::vector<double>* history) {
  const std::size_t k = p.size();
  constexpr std::size_t kWindow = 50;
  DescentOutcome out{x, f(x), 0, false};
  std::vector<double> g(k);
  std::vector<std::size_t> order;
  std::vector<double> average(k, 0.0);
  double weight = 0.0;
  std::vector<double> window_best;
  window_best.reserve(config.max_iters + 1);
  window_best.push_back(out.best_value);
  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    out.iterations = it;
    p.gradient(x, g);
    tangent_direction(x, g, order);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      out.converged = true;
      break;
    }
    const double step = config.step_scale / std::sqrt(static_cast<double>(it));
    for (std::size_t l = 0; l < k; ++l) x[l] -= step * g[l] / norm;
    x = project_simplex(x, p.population);
    const double value = f(x);
    if (value < out.best_value) {
      out.best_value = value;
      out.best = x;
    }
    // step-weighted average over the current doubling epoch
    if ((it & (it - 1)) == 0) {
      std::fill(average.begin(), average.end(), 0.0);
      weight = 0.0;
    }
    weight += step;
    for (std::size_t l = 0; l < k; ++l) average[l] += (step / weight) * (x[l] - average[l]);
    const double average_value = f(average);
    if (average_value < out.best_value) {
      out.best_value = average_value;
      out.best = average;
    }
    if (history) history->push_back(out.best_value);
    window_best.push_back(out.best_value);
    const std::size_t window = std::max(kWindow, it / 2);
    if (it >= window) {
      const double change = window_best[it - window] - out.best_value;
      if (change <= config.tol * std::max(1.0, std::abs(out.best_value))) {
        out.converged = true;
        break;
      }
    }
  }
  return out;
}

std::vector<double> random_simplex_point(std::size_t k, double total, std::uint64_t key) {
  CounterRng rng(key);
  std::vector<double> x(k);
  double sum = 0.0;
  for (double& v : x) {
    v = -std::log(rng.uniform_open());
    sum += v;
  }
  for (double& v : x) v *= total / sum;
  return x;
}

}  // namespace

StepSolution solve_step(const ObjectiveSpec& spec, std::size_t t, const SolverConfig& config) {
  config.validate();
  if (t >= spec.steps()) throw Error(ErrorKind::IndexOutOfRange, "timestep " + std::to_string(t) + " out of range");
  const std::size_t m = spec.locations();
  const StepProblem problem(spec, t);
  if (problem.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "every location is pinned at timestep " + std::to_string(t));

  auto full_objective = [&](std::span<const double> reduced) {
    return step_objective(problem.expand(reduced, m), spec, t);
  };

  StepSolution sol;
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();

  const bool use_dual =
      config.algorithm == SolverAlgorithm::DualBisection ||
      (config.algorithm == SolverAlgorithm::Auto && spec.mode == LogFactorialMode::ExactLogGamma);
  if (use_dual) {
    if (spec.mode != LogFactorialMode::ExactLogGamma)
      throw Error(ErrorKind::InvalidArgument, "dual_bisection requires the exact_log_gamma objective");
    std::size_t iterations = 0;
    best = dual_solve(problem, iterations);
    best_value = full_objective(best);
    sol.report.iterations = iterations;
    sol.report.converged = true;
    if (config.record_history) sol.report.best_history.push_back(best_value);
  } else {
    const std::uint64_t step_key = derive_key(config.seed, StreamDomain::Restart, t);
    sol.report.converged = false;
    for (std::size_t restart = 0; restart < config.restarts; ++restart) {
      std::vector<double> start =
          restart == 0 ? project_simplex(problem.noisy, problem.population)
                       : random_simplex_point(problem.size(), problem.population,
                                              derive_key(step_key, StreamDomain::Restart, restart));
      auto outcome = projected_subgradient(problem, std::move(start), config, full_objective,
                                           config.record_history ? &sol.report.best_history : nullptr);
      sol.report.iterations += outcome.iterations;
      if (outcome.best_value < best_value) {
        best_value = outcome.best_value;
        best = std::move(outcome.best);
        sol.report.converged = outcome.converged;
      }
    }
    if (config.record_history) {
      // fold restarts into one running best
      for (std::size_t i = 1; i < sol.report.best_history.size(); ++i)
        sol.report.best_history[i] = std::min(sol.report.best_history[i], sol.report.best_history[i - 1]);
    }
  }

  sol.estimate = problem.expand(best, m);
  sol.report.objective = best_value;

  if (config.round_mode == RoundMode::LargestRemainder) {
    const double rounded_n = std::round(spec.population);
    if (std::abs(rounded_n - spec.population) > kConstraintTol)
      throw Error(ErrorKind::InvalidArgument, "rounding needs an integer population");
    auto rounded = largest_remainder(sol.estimate, static_cast<long long>(rounded_n));
    const double rounded_value = step_objective(rounded, spec, t);
    if (rounded_value <= best_value + 1e-6) {
      sol.estimate = std::move(rounded);
      sol.report.objective = rounded_value;
      sol.report.rounded = true;
    }
  }

  const double sum = std::accumulate(sol.estimate.begin(), sol.estimate.end(), 0.0);
  sol.report.residual = std::abs(sum - spec.population);
  sol.report.min_entry = *std::min_element(sol.estimate.begin(), sol.estimate.end());
  return sol;
}

namespace {

SolveResult assemble(const ObjectiveSpec& spec, std::vector<StepSolution>& steps,
                     std::chrono::steady_clock::time_point start) {
  Matrix values(spec.steps(), spec.locations());
  SolveReport report;
  report.steps.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    for (std::size_t l = 0; l < spec.locations(); ++l) values(t, l) = steps[t].estimate[l];
    report.total_objective += steps[t].report.objective;
    report.steps.push_back(std::move(steps[t].report));
  }
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {CountStream::estimate(std::move(values), spec.population), std::move(report)};
}

}  // namespace

SolveResult solve_map_serial(const ObjectiveSpec& spec, const SolverConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<StepSolution> steps(spec.steps());
  for (std::size_t t = 0; t < spec.steps(); ++t) steps[t] = solve_step(spec, t, config);
  return assemble(spec, steps, start);
}

SolveResult solve_map(const ObjectiveSpec& spec, const SolverConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<StepSolution> steps(spec.steps());
  const auto count = static_cast<std::ptrdiff_t>(spec.steps());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    try {
      steps[static_cast<std::size_t>(t)] = solve_step(spec, static_cast<std::size_t>(t), config);
    } catch (...) {
#pragma omp critical(dpcorr_solver_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return assemble(spec, steps, start);
}

CountStream solve_baseline_mle(const CountStream& noisy, double lambda, double population) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  Matrix values(noisy.steps(), noisy.locations());
  for (std::size_t t = 0; t < noisy.steps(); ++t) {
    const auto projected = project_simplex(noisy.row(t), population);
    std::copy(projected.begin(), projected.end(), values.row(t).begin());
  }
  return CountStream::estimate(std::move(values), population);
}

OracleResult brute_force_oracle(const ObjectiveSpec& spec, std::size_t t) {
  if (t >= spec.steps()) throw Error(ErrorKind::IndexOutOfRange, "timestep " + std::to_string(t) + " out of range");
  const double rounded = std::round(spec.population);
  if (std::abs(rounded - spec.population) > kConstraintTol)
    throw Error(ErrorKind::InvalidArgument, "oracle needs an integer population");
  const auto n = static_cast<std::size_t>(rounded);
  const std::size_t m = spec.locations();
  const std::size_t count = composition_count(n, m);
  if (count > kOracleLimit)
    throw Error(ErrorKind::InstanceTooLarge,
                std::to_string(count) + " compositions exceed the limit of " + std::to_string(kOracleLimit));

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<double> candidate(m, 0.0);
  // lexicographic order: leading coordinate ascending, remainder in the last
  auto visit = [&](auto&& self, std::size_t l, std::size_t left) -> void {
    if (l + 1 == m) {
      candidate[l] = static_cast<double>(left);
      ++best.candidates;
      const double value = step_objective(candidate, spec, t);
      if (value < best.objective) {
        best.objective = value;
        best.counts.assign(m, 0);
        for (std::size_t i = 0; i < m; ++i) best.counts[i] = static_cast<long long>(candidate[i]);
      }
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      candidate[l] = static_cast<double>(v);
      self(self, l + 1, left - v);
    }
  };
  visit(visit, 0, n);
  return best;
}

}  // namespace dpcorr
