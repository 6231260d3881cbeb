#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpd/bench/config.hpp"
#include "mpd/forecast/model.hpp"
#include "mpd/ppo/train.hpp"

namespace mpd::bench {

struct ForecasterBundle {
  std::shared_ptr<const forecast::Forecaster> width;
  std::shared_ptr<const forecast::Forecaster> thickness;
  /// Test-split scores of both forecasters and the linear baselines.
  nlohmann::json metrics;
};

/// The plant dataset for a forecaster seed.
plant::Series generate_series(const Config& cfg, std::uint64_t seed);

struct ForecasterFit {
  std::shared_ptr<const forecast::Forecaster> model;
  /// Test-split scores of the forecaster ("lstnet") and the linear baselines
  /// ("linreg", "linreg_window_mean"), plus the epoch history.
  nlohmann::json metrics;
};

/// Trains one forecaster and both linear baselines on the same split.
ForecasterFit fit_forecaster(const Config& cfg, const forecast::FeatureSpec& spec, const plant::Series& series,
                             std::uint64_t seed, std::ostream* log = nullptr);

/// Directory holding the forecasters trained with `seed` under `out_dir`.
std::filesystem::path forecaster_dir(const std::filesystem::path& out_dir, std::uint64_t seed);

/// Generates the plant dataset, trains both forecasters and the linear
/// baselines, and writes width.json, thickness.json and metrics.json into
/// forecaster_dir(out_dir, seed).
ForecasterBundle train_forecasters(const Config& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                   std::ostream* log = nullptr);
/// Throws std::runtime_error if the files are missing.
ForecasterBundle load_forecasters(const std::filesystem::path& out_dir, std::uint64_t seed);
/// Loads when present, trains otherwise.
ForecasterBundle ensure_forecasters(const Config& cfg, const std::filesystem::path& out_dir,
                                    std::ostream* log = nullptr);

/// Seeds derived from (base, stream, scenario name) with FNV-1a mixing.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, const std::string& label = "");

/// Builds an environment for the scenario, backed by the forecasters or by
/// the plant depending on experiment.environment.
std::unique_ptr<env::Environment> make_environment(const Config& cfg, const Scenario& scenario,
                                                   const env::RewardConfig& reward, const ForecasterBundle* bundle,
                                                   std::uint64_t seed);

struct RunRecord {
  std::string variant;
  Scenario scenario;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  /// Mean greedy optimize step over the evaluation episodes.
  double average_optimize_step = 0.0;
  double success_rate = 0.0;
  std::vector<std::size_t> eval_steps;
  std::vector<ppo::EpisodeRecord> curve;
  /// First evaluation episode, per step.
  std::vector<double> trace_width;
  std::vector<double> trace_thickness;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

std::filesystem::path cell_dir(const std::filesystem::path& out_dir, const std::string& variant,
                               const Scenario& scenario, std::uint64_t seed);

/// Trains one agent and evaluates it greedily. Writes curve.csv, trace.csv,
/// checkpoint.json, checkpoint_best.json, record.json and timing.json into
/// cell_dir(). Exceptions become a failed record whose average equals the
/// episode length.
RunRecord run_cell(const Config& cfg, const std::string& variant, const Scenario& scenario, std::uint64_t seed,
                   const ForecasterBundle* bundle, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

struct GridSelection {
  std::vector<std::string> variants;  // empty means the configured list
  std::vector<Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  /// Reuse a cell whose record.json already exists instead of retraining.
  bool resume = false;
};

std::vector<RunRecord> run_grid(const Config& cfg, const ForecasterBundle* bundle, const std::filesystem::path& out_dir,
                                const GridSelection& selection = {}, std::ostream* log = nullptr);
std::vector<RunRecord> run_ablations(const Config& cfg, const ForecasterBundle* bundle,
                                     const std::filesystem::path& out_dir, const GridSelection& selection = {},
                                     std::ostream* log = nullptr);

/// Every record.json under out_dir/runs, in path order.
std::vector<RunRecord> load_records(const std::filesystem::path& out_dir);

}  // namespace mpd::bench
