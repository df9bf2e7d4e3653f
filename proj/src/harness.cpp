#include "dpcorr/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include <omp.h>

#include "dpcorr/correlation.hpp"
#include "dpcorr/mechanism.hpp"
#include "dpcorr/metrics.hpp"
#include "dpcorr/synth.hpp"

namespace dpcorr {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::MapFrequency: return "map_frequency";
    case Method::MapUniform: return "map_uniform";
    case Method::BaselineMle: return "baseline_mle";
    case Method::RawNoisy: return "raw_noisy";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "map_frequency") return Method::MapFrequency;
  if (text == "map_uniform") return Method::MapUniform;
  if (text == "baseline_mle") return Method::BaselineMle;
  if (text == "raw_noisy") return Method::RawNoisy;
  throw Error(ErrorKind::Parse, "unknown method '" + std::string(text) + "'");
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t cell_seed(std::uint64_t seed_base, std::size_t point_index, std::size_t run) {
  return fnv1a64(std::to_string(seed_base) + ":" + std::to_string(point_index) + ":" + std::to_string(run));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const {
  if (runs < 1) throw Error(ErrorKind::InvalidArgument, "field 'runs' must be >= 1");
  if (budgets.empty()) throw Error(ErrorKind::InvalidArgument, "field 'budgets' must not be empty");
  for (double b : budgets)
    if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "field 'budgets' must hold positive values");
  if (smoothing_s.empty()) throw Error(ErrorKind::InvalidArgument, "field 'smoothing_s' must not be empty");
  for (double s : smoothing_s)
    if (!(s >= 0.0)) throw Error(ErrorKind::InvalidArgument, "field 'smoothing_s' must hold values >= 0");
  if (steps.empty()) throw Error(ErrorKind::InvalidArgument, "field 'T' must not be empty");
  for (std::size_t t : steps)
    if (t < 1) throw Error(ErrorKind::InvalidArgument, "field 'T' must hold values >= 1");
  if (n_users < 1) throw Error(ErrorKind::InvalidArgument, "field 'n_users' must be >= 1");
  if (methods.empty()) throw Error(ErrorKind::InvalidArgument, "field 'methods' must not be empty");
  if (initial && initial->size() != base_matrix.size())
    throw Error(ErrorKind::DimensionMismatch, "field 'initial' has " + std::to_string(initial->size()) +
                                                  " entries, base_matrix has m=" +
                                                  std::to_string(base_matrix.size()));
  if (!(floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "field 'floor' must be positive");
  PrivacyParams(sensitivity, budgets.front(), budget_mode, scale_multiplier);
  solver.validate();
}

namespace {

template <typename T>
std::vector<T> scalar_or_list(const json& v, std::string_view field) {
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' must be a number or a list of numbers");
  }
}

template <typename T>
T field_as(const json& v, std::string_view field) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Parse, "field '" + std::string(field) + "' has the wrong type");
  }
}

const std::set<std::string, std::less<>> kConfigFields = {
    "base_matrix", "smoothing_s", "budgets",  "budget_mode",      "scale_multiplier",       "sensitivity",
    "T",           "n_users",     "prior_policy", "initial",      "runs",                   "seed_base",
    "solver",      "log_factorial", "floor",  "hard_pin",         "methods",                "record_wall_time",
    "plausibility_max_users"};

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "experiment config must be an object");
  for (const auto& [key, _] : j.items())
    if (!kConfigFields.contains(key)) throw Error(ErrorKind::Parse, "unknown field '" + key + "'");
  if (!j.contains("base_matrix")) throw Error(ErrorKind::Parse, "missing field 'base_matrix'");

  const json& base = j.at("base_matrix");
  ExperimentConfig c(base.is_array() ? TransitionMatrix(matrix_from_json(base, "base_matrix"))
                                     : transition_matrix_from_json(base));
  if (j.contains("smoothing_s")) c.smoothing_s = scalar_or_list<double>(j.at("smoothing_s"), "smoothing_s");
  if (j.contains("budgets")) c.budgets = scalar_or_list<double>(j.at("budgets"), "budgets");
  if (j.contains("budget_mode")) c.budget_mode = parse_privacy_mode(field_as<std::string>(j.at("budget_mode"), "budget_mode"));
  if (j.contains("scale_multiplier")) c.scale_multiplier = field_as<double>(j.at("scale_multiplier"), "scale_multiplier");
  if (j.contains("sensitivity")) c.sensitivity = field_as<double>(j.at("sensitivity"), "sensitivity");
  if (j.contains("T")) c.steps = scalar_or_list<std::size_t>(j.at("T"), "T");
  if (j.contains("n_users")) c.n_users = field_as<std::size_t>(j.at("n_users"), "n_users");
  if (j.contains("prior_policy")) c.prior_policy = parse_prior_policy(field_as<std::string>(j.at("prior_policy"), "prior_policy"));
  if (j.contains("initial")) c.initial = location_distribution_from_json(j.at("initial"));
  if (j.contains("runs")) c.runs = field_as<std::size_t>(j.at("runs"), "runs");
  if (j.contains("seed_base")) c.seed_base = field_as<std::uint64_t>(j.at("seed_base"), "seed_base");
  if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver"));
  if (j.contains("log_factorial")) c.log_factorial = parse_log_factorial_mode(field_as<std::string>(j.at("log_factorial"), "log_factorial"));
  if (j.contains("floor")) c.floor = field_as<double>(j.at("floor"), "floor");
  if (j.contains("hard_pin")) c.hard_pin = field_as<bool>(j.at("hard_pin"), "hard_pin");
  if (j.contains("record_wall_time")) c.record_wall_time = field_as<bool>(j.at("record_wall_time"), "record_wall_time");
  if (j.contains("plausibility_max_users"))
    c.plausibility_max_users = field_as<std::size_t>(j.at("plausibility_max_users"), "plausibility_max_users");
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& name : field_as<std::vector<std::string>>(j.at("methods"), "methods"))
      c.methods.push_back(parse_method(name));
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  json j{{"base_matrix", to_json(c.base_matrix)},
         {"smoothing_s", c.smoothing_s},
         {"budgets", c.budgets},
         {"budget_mode", to_string(c.budget_mode)},
         {"scale_multiplier", c.scale_multiplier},
         {"sensitivity", c.sensitivity},
         {"T", c.steps},
         {"n_users", c.n_users},
         {"prior_policy", to_string(c.prior_policy)},
         {"runs", c.runs},
         {"seed_base", c.seed_base},
         {"solver", to_json(c.solver)},
         {"log_factorial", to_string(c.log_factorial)},
         {"floor", c.floor},
         {"hard_pin", c.hard_pin},
         {"methods", std::move(methods)},
         {"record_wall_time", c.record_wall_time},
         {"plausibility_max_users", c.plausibility_max_users}};
  if (c.initial) j["initial"] = to_json(*c.initial);
  return j;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (double s : config.smoothing_s)
    for (std::size_t steps : config.steps)
      for (double budget : config.budgets) points.push_back({points.size(), s, steps, budget});
  return points;
}

// ---------------------------------------------------------------------------
// pipeline stages

PostprocessResult postprocess(Method method, const CountStream& noisy, const TransitionMatrix& tm, double lambda,
                              std::size_t population, const PostprocessOptions& options) {
  if (noisy.locations() != tm.size())
    throw Error(ErrorKind::DimensionMismatch, "noisy counts have m=" + std::to_string(noisy.locations()) +
                                                  " but the matrix has m=" + std::to_string(tm.size()));
  const auto n = static_cast<double>(population);
  switch (method) {
    case Method::RawNoisy:
      return {noisy, std::nullopt, std::nullopt};
    case Method::BaselineMle: {
      auto estimate = solve_baseline_mle(noisy, lambda, n);
      double value = 0.0;
      for (std::size_t t = 0; t < noisy.steps(); ++t) value += fidelity_term(estimate.row(t), noisy.row(t), lambda);
      return {std::move(estimate), value, std::nullopt};
    }
    case Method::MapFrequency:
    case Method::MapUniform: {
      const PriorPolicy policy = method == Method::MapFrequency ? PriorPolicy::Frequency : PriorPolicy::Uniform;
      auto probs = propagate_all(prior_distribution(policy, noisy.row(0), population), tm, noisy.steps());
      const ObjectiveSpec spec(lambda, std::move(probs), noisy, n, options.log_factorial, options.floor,
                               options.hard_pin);
      auto solved = solve_map(spec, options.solver);
      const double value = solved.report.total_objective;
      return {std::move(solved.estimate), value, std::move(solved.report)};
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method");
}

CellMetrics evaluate(const CountStream& estimate, const CountStream& truth, const TransitionMatrix& tm,
                     bool plausibility_applicable, std::size_t plausibility_max_users) {
  CellMetrics metrics{mse(estimate, truth), std::nullopt};
  const auto population = truth.population();
  if (plausibility_applicable && population && *population <= static_cast<double>(plausibility_max_users) &&
      estimate.kind() == StreamKind::Estimate) {
    const auto rounded = round_stream(estimate, static_cast<long long>(std::llround(*population)));
    metrics.plausibility_violations = plausibility_violations(stepwise_plausibility(rounded, tm));
  }
  return metrics;
}

CellData simulate_cell(const ExperimentConfig& config, const SweepPoint& point, std::size_t run) {
  const std::uint64_t seed = cell_seed(config.seed_base, point.index, run);
  TransitionMatrix tm = smooth_correlations(config.base_matrix, point.s);
  const LocationDistribution initial = config.initial ? *config.initial : LocationDistribution::uniform(tm.size());
  const auto trajectories = generate_trajectories(tm, config.n_users, point.steps, initial, RandomSeed{seed});
  CountStream truth = count_query(trajectories, tm.size());
  const PrivacyParams params(config.sensitivity, point.budget, config.budget_mode, config.scale_multiplier);
  CountStream noisy = release_stream(truth, params, RandomSeed{seed});
  return {seed, std::move(tm), params.lambda(), std::move(truth), std::move(noisy)};
}

// ---------------------------------------------------------------------------
// sweep

const PointMean& SweepResult::mean(Method method, std::size_t point_index) const {
  for (const auto& m : means)
    if (m.method == method && m.point_index == point_index) return m;
  throw Error(ErrorKind::IndexOutOfRange, "no mean for " + std::string(to_string(method)) + " at point " +
                                              std::to_string(point_index));
}

namespace {

std::vector<SweepRow> run_cell(const ExperimentConfig& config, const SweepPoint& point, std::size_t run) {
  const CellData cell = simulate_cell(config, point, run);
  PostprocessOptions options{config.log_factorial, config.floor, config.hard_pin, config.solver};
  options.solver.seed = cell.seed;

  std::vector<SweepRow> rows;
  for (Method method : config.methods) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = postprocess(method, cell.noisy, cell.tm, cell.lambda, config.n_users, options);
    const auto metrics = evaluate(result.estimate, cell.truth, cell.tm, method != Method::RawNoisy,
                                  config.plausibility_max_users);
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rows.push_back({method, point.index, point.budget, point.steps, point.s, run, cell.seed, metrics.mse,
                    metrics.plausibility_violations, result.objective,
                    config.record_wall_time ? std::optional<double>(elapsed) : std::nullopt});
  }
  return rows;
}

std::vector<PointMean> summarize(const ExperimentConfig& config, const std::vector<SweepPoint>& points,
                                 const std::vector<SweepRow>& rows) {
  std::vector<PointMean> means;
  for (const auto& point : points) {
    for (Method method : config.methods) {
      PointMean pm{method, point.index, point.budget, point.steps, point.s, 0, 0.0, 0.0, 0.0, 0.0};
      double sum_sq = 0.0;
      bool have_plaus = true;
      bool have_obj = true;
      double plaus = 0.0;
      double obj = 0.0;
      for (const auto& row : rows) {
        if (row.point_index != point.index || row.method != method) continue;
        ++pm.runs;
        pm.mean_mse += row.mse;
        sum_sq += row.mse * row.mse;
        if (row.plausibility_violations) plaus += static_cast<double>(*row.plausibility_violations);
        else have_plaus = false;
        if (row.objective) obj += *row.objective;
        else have_obj = false;
      }
      const auto k = static_cast<double>(pm.runs);
      pm.mean_mse /= k;
      pm.sd_mse = pm.runs > 1 ? std::sqrt(std::max(0.0, (sum_sq - k * pm.mean_mse * pm.mean_mse) / (k - 1.0))) : 0.0;
      pm.mean_plausibility_violations = have_plaus ? std::optional<double>(plaus / k) : std::nullopt;
      pm.mean_objective = have_obj ? std::optional<double>(obj / k) : std::nullopt;
      means.push_back(pm);
    }
  }
  return means;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto points = sweep_points(config);
  const std::size_t jobs = points.size() * config.runs;
  std::vector<std::vector<SweepRow>> per_job(jobs);
  std::exception_ptr failure;
  const int team = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(team)
  for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(jobs); ++job) {
    const auto& point = points[static_cast<std::size_t>(job) / config.runs];
    const std::size_t run = static_cast<std::size_t>(job) % config.runs;
    try {
      per_job[static_cast<std::size_t>(job)] = run_cell(config, point, run);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "cell (point " << point.index << ": s=" << format_double(point.s) << ", T=" << point.steps
          << ", budget=" << format_double(point.budget) << "; run " << run << "): " << e.what();
      const Error* typed = dynamic_cast<const Error*>(&e);
#pragma omp critical(dpcorr_sweep_failure)
      if (!failure)
        failure = std::make_exception_ptr(typed ? Error(typed->kind(), msg.str()) : Error(ErrorKind::InvalidArgument, msg.str()));
    }
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.rows.reserve(jobs * config.methods.size());
  for (auto& rows : per_job)
    for (auto& row : rows) result.rows.push_back(std::move(row));
  // canonical order: point, method (config order), run
  auto method_rank = [&](Method m) {
    return std::find(config.methods.begin(), config.methods.end(), m) - config.methods.begin();
  };
  std::stable_sort(result.rows.begin(), result.rows.end(), [&](const SweepRow& a, const SweepRow& b) {
    if (a.point_index != b.point_index) return a.point_index < b.point_index;
    if (a.method != b.method) return method_rank(a.method) < method_rank(b.method);
    return a.run < b.run;
  });
  result.means = summarize(config, points, result.rows);
  return result;
}

std::string format_rows_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "method,budget,T,s,run,seed,mse,plausibility_violations,objective,wall_ms\n";
  for (const auto& r : result.rows) {
    out << to_string(r.method) << ',' << format_double(r.budget) << ',' << r.steps << ',' << format_double(r.s)
        << ',' << r.run << ',' << r.seed << ',' << format_double(r.mse) << ','
        << (r.plausibility_violations ? std::to_string(*r.plausibility_violations) : "NA") << ','
        << (r.objective ? format_double(*r.objective) : "NA") << ','
        << (r.wall_ms ? format_double(*r.wall_ms) : "NA") << '\n';
  }
  return out.str();
}

std::string format_means_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "method,budget,T,s,runs,mean_mse,sd_mse,mean_plausibility_violations,mean_objective\n";
  for (const auto& m : result.means) {
    out << to_string(m.method) << ',' << format_double(m.budget) << ',' << m.steps << ',' << format_double(m.s)
        << ',' << m.runs << ',' << format_double(m.mean_mse) << ',' << format_double(m.sd_mse) << ','
        << (m.mean_plausibility_violations ? format_double(*m.mean_plausibility_violations) : "NA") << ','
        << (m.mean_objective ? format_double(*m.mean_objective) : "NA") << '\n';
  }
  return out.str();
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, text] : {std::pair{"rows.csv", format_rows_csv(result)},
                                   std::pair{"means.csv", format_means_csv(result)}}) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (out_dir / name).string() + "'");
    out << text;
  }
}

}  // namespace dpcorr
