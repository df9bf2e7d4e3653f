// dpcorr: generate, release, post-process and evaluate correlated location
// count streams, or run a whole seeded sweep.
//
// Exit codes: 0 ok, 2 validation failure, 3 runtime failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "dpcorr/core_model.hpp"
#include "dpcorr/correlation.hpp"
#include "dpcorr/harness.hpp"
#include "dpcorr/mechanism.hpp"
#include "dpcorr/metrics.hpp"
#include "dpcorr/synth.hpp"

namespace fs = std::filesystem;
using namespace dpcorr;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Files written by this invocation; removed again unless the command commits.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  void write_json(const std::string& name, const json& j) {
    fs::create_directories(dir_);
    const fs::path p = dir_ / name;
    written_.push_back(p);
    write_json_file(p, j);
  }

  void write_text(const std::string& name, const std::string& text) {
    fs::create_directories(dir_);
    const fs::path p = dir_ / name;
    written_.push_back(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << text;
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

template <typename F>
auto load(const std::string& path, F&& parse) {
  try {
    return parse(read_json_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), "file '" + path + "': " + e.what());
  }
}

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

std::optional<ExperimentConfig> load_config(const Common& common) {
  if (common.config_path.empty()) return std::nullopt;
  return load(common.config_path, [](const json& j) { return experiment_config_from_json(j); });
}

std::uint64_t resolve_seed(const Common& common, const std::optional<ExperimentConfig>& config) {
  if (common.seed) return *common.seed;
  return config ? config->seed_base : 0;
}

TransitionMatrix resolve_matrix(const std::string& matrix_path, const std::optional<ExperimentConfig>& config,
                                std::optional<double> smoothing) {
  std::optional<TransitionMatrix> base;
  if (!matrix_path.empty())
    base = load(matrix_path, [](const json& j) { return transition_matrix_from_json(j); });
  else if (config)
    base = config->base_matrix;
  else
    throw Error(ErrorKind::InvalidArgument, "need --matrix or --config");
  const double s = smoothing ? *smoothing : (config ? config->smoothing_s.front() : 0.0);
  return smooth_correlations(*base, s);
}

PrivacyParams resolve_privacy(const std::string& privacy_path, std::optional<double> budget,
                              std::optional<double> sensitivity, const std::string& mode,
                              std::optional<double> multiplier, const std::optional<ExperimentConfig>& config) {
  if (!privacy_path.empty()) return load(privacy_path, [](const json& j) { return privacy_params_from_json(j); });
  const double b = budget ? *budget : (config ? config->budgets.front() : throw Error(ErrorKind::InvalidArgument, "need --budget, --privacy or --config"));
  const double d = sensitivity ? *sensitivity : (config ? config->sensitivity : 1.0);
  const PrivacyMode pm = !mode.empty() ? parse_privacy_mode(mode) : (config ? config->budget_mode : PrivacyMode::PlainDp);
  const double mult = multiplier ? *multiplier : (config ? config->scale_multiplier : 1.0);
  return PrivacyParams(d, b, pm, mult);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private count-stream release with correlation-aware MAP post-processing"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config (JSON)");
    sub->add_option("--out", common.out_dir, "Output directory")->required();
    sub->add_option("--seed", common.seed, "64-bit seed");
    sub->add_option("--threads", common.threads, "OpenMP threads (0 = default)");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate user trajectories and the true count stream");
  add_common(gen);
  std::string gen_matrix, gen_initial;
  std::optional<double> gen_smoothing;
  std::optional<std::size_t> gen_users, gen_steps;
  gen->add_option("--matrix", gen_matrix, "Base transition matrix (JSON)");
  gen->add_option("--smoothing", gen_smoothing, "Laplacian smoothing level s");
  gen->add_option("--users", gen_users, "Number of users n");
  gen->add_option("--steps", gen_steps, "Number of timesteps T");
  gen->add_option("--initial", gen_initial, "Initial location distribution (JSON)");

  // release
  auto* rel = app.add_subcommand("release", "Add Laplace noise to a true count stream");
  add_common(rel);
  std::string rel_counts, rel_mode;
  std::optional<double> rel_budget, rel_sensitivity, rel_multiplier;
  rel->add_option("--counts", rel_counts, "True counts (JSON)")->required();
  rel->add_option("--budget", rel_budget, "Privacy budget (epsilon or alpha)");
  rel->add_option("--sensitivity", rel_sensitivity, "Global sensitivity");
  rel->add_option("--mode", rel_mode, "plain_dp or temporal_dp");
  rel->add_option("--scale-multiplier", rel_multiplier, "Noise inflation in temporal_dp mode");

  // postprocess
  auto* post = app.add_subcommand("postprocess", "Estimate counts from a noisy stream");
  add_common(post);
  std::string post_noisy, post_matrix, post_privacy, post_method, post_mode, post_log_factorial;
  std::optional<double> post_smoothing, post_budget, post_sensitivity, post_multiplier;
  std::optional<std::size_t> post_users;
  bool post_round = false;
  post->add_option("--noisy", post_noisy, "Noisy counts (JSON)")->required();
  post->add_option("--matrix", post_matrix, "Base transition matrix (JSON)");
  post->add_option("--smoothing", post_smoothing, "Laplacian smoothing level s");
  post->add_option("--users", post_users, "Population n");
  post->add_option("--privacy", post_privacy, "Privacy parameters written by release (JSON)");
  post->add_option("--budget", post_budget, "Privacy budget");
  post->add_option("--sensitivity", post_sensitivity, "Global sensitivity");
  post->add_option("--mode", post_mode, "plain_dp or temporal_dp");
  post->add_option("--scale-multiplier", post_multiplier, "Noise inflation in temporal_dp mode");
  post->add_option("--method", post_method, "map_frequency | map_uniform | baseline_mle | raw_noisy");
  post->add_option("--log-factorial", post_log_factorial, "exact_log_gamma or stirling");
  post->add_flag("--round", post_round, "Largest-remainder rounding of MAP estimates");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "MSE and plausibility of an estimate against the truth");
  add_common(eval);
  std::string eval_estimate, eval_truth, eval_matrix;
  std::optional<double> eval_smoothing;
  std::size_t eval_max_users = 5;
  eval->add_option("--estimate", eval_estimate, "Estimated counts (JSON)")->required();
  eval->add_option("--truth", eval_truth, "True counts (JSON)")->required();
  eval->add_option("--matrix", eval_matrix, "Base transition matrix for plausibility (JSON)");
  eval->add_option("--smoothing", eval_smoothing, "Laplacian smoothing level s");
  eval->add_option("--plausibility-max-users", eval_max_users, "Skip plausibility above this population");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a seeded experiment sweep");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (common.threads > 0) omp_set_num_threads(common.threads);
  OutputSet outputs(common.out_dir);

  try {
    const auto config = load_config(common);

    if (gen->parsed()) {
      const auto tm = resolve_matrix(gen_matrix, config, gen_smoothing);
      const std::size_t users = gen_users ? *gen_users : (config ? config->n_users : 0);
      const std::size_t steps = gen_steps ? *gen_steps : (config ? config->steps.front() : 0);
      if (users == 0) throw Error(ErrorKind::InvalidArgument, "need --users (or n_users in --config)");
      if (steps == 0) throw Error(ErrorKind::InvalidArgument, "need --steps (or T in --config)");
      LocationDistribution initial = LocationDistribution::uniform(tm.size());
      if (!gen_initial.empty())
        initial = load(gen_initial, [](const json& j) { return location_distribution_from_json(j); });
      else if (config && config->initial)
        initial = *config->initial;
      const auto trajectories =
          generate_trajectories(tm, users, steps, initial, RandomSeed{resolve_seed(common, config)});
      outputs.write_json("trajectories.json", to_json(trajectories));
      outputs.write_json("counts.json", to_json(count_query(trajectories, tm.size())));
    } else if (rel->parsed()) {
      const auto truth = load(rel_counts, [](const json& j) { return count_stream_from_json(j); });
      if (truth.kind() != StreamKind::True)
        throw Error(ErrorKind::InvalidArgument, "file '" + rel_counts + "': field 'kind' must be true");
      const auto params = resolve_privacy("", rel_budget, rel_sensitivity, rel_mode, rel_multiplier, config);
      outputs.write_json("noisy.json", to_json(release_stream(truth, params, RandomSeed{resolve_seed(common, config)})));
      outputs.write_json("privacy.json", to_json(params));
    } else if (post->parsed()) {
      const auto noisy = load(post_noisy, [](const json& j) { return count_stream_from_json(j); });
      const auto tm = resolve_matrix(post_matrix, config, post_smoothing);
      if (tm.size() != noisy.locations())
        throw Error(ErrorKind::DimensionMismatch,
                    "matrix '" + (post_matrix.empty() ? common.config_path : post_matrix) + "' has m=" +
                        std::to_string(tm.size()) + " but counts '" + post_noisy + "' have m=" +
                        std::to_string(noisy.locations()));
      const std::size_t users = post_users ? *post_users : (config ? config->n_users : 0);
      if (users == 0) throw Error(ErrorKind::InvalidArgument, "need --users (or n_users in --config)");
      const auto params =
          resolve_privacy(post_privacy, post_budget, post_sensitivity, post_mode, post_multiplier, config);
      const Method method = !post_method.empty() ? parse_method(post_method)
                            : (config && config->prior_policy == PriorPolicy::Uniform) ? Method::MapUniform
                                                                                       : Method::MapFrequency;
      PostprocessOptions options;
      if (config) options = {config->log_factorial, config->floor, config->hard_pin, config->solver};
      if (!post_log_factorial.empty()) options.log_factorial = parse_log_factorial_mode(post_log_factorial);
      if (post_round) options.solver.round_mode = RoundMode::LargestRemainder;
      options.solver.seed = resolve_seed(common, config);
      const auto result = postprocess(method, noisy, tm, params.lambda(), users, options);
      json report{{"method", to_string(method)},
                  {"lambda", params.lambda()},
                  {"objective", result.objective ? json(*result.objective) : json(nullptr)}};
      if (result.report) report["solve"] = to_json(*result.report);
      outputs.write_json("estimate.json", to_json(result.estimate));
      outputs.write_json("report.json", report);
    } else if (eval->parsed()) {
      const auto estimate = load(eval_estimate, [](const json& j) { return count_stream_from_json(j); });
      const auto truth = load(eval_truth, [](const json& j) { return count_stream_from_json(j); });
      if (estimate.steps() != truth.steps() || estimate.locations() != truth.locations())
        throw Error(ErrorKind::ShapeMismatch,
                    "estimate '" + eval_estimate + "' is " + std::to_string(estimate.steps()) + "x" +
                        std::to_string(estimate.locations()) + " but truth '" + eval_truth + "' is " +
                        std::to_string(truth.steps()) + "x" + std::to_string(truth.locations()));
      json metrics;
      if (!eval_matrix.empty() || config) {
        const auto tm = resolve_matrix(eval_matrix, config, eval_smoothing);
        const std::size_t max_users = config ? config->plausibility_max_users : eval_max_users;
        const auto m = evaluate(estimate, truth, tm, true, max_users);
        metrics = {{"mse", m.mse},
                   {"plausibility_violations",
                    m.plausibility_violations ? json(*m.plausibility_violations) : json(nullptr)}};
      } else {
        metrics = {{"mse", mse(estimate, truth)}, {"plausibility_violations", nullptr}};
      }
      outputs.write_json("metrics.json", metrics);
    } else if (sweep->parsed()) {
      if (!config) throw Error(ErrorKind::InvalidArgument, "sweep needs --config");
      ExperimentConfig cfg = *config;
      if (common.seed) cfg.seed_base = *common.seed;
      const auto result = run_sweep(cfg, common.threads);
      outputs.write_text("rows.csv", format_rows_csv(result));
      outputs.write_text("means.csv", format_means_csv(result));
    }
    outputs.commit();
    return 0;
  } catch (const Error& e) {
    std::cerr << "dpcorr: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "dpcorr: " << e.what() << '\n';
    return kExitRuntime;
  }
}
