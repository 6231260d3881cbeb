#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpd/env/env.hpp"
#include "mpd/forecast/data.hpp"
#include "mpd/forecast/lstnet.hpp"
#include "mpd/plant/plant.hpp"
#include "mpd/ppo/agent.hpp"

namespace mpd::bench {

struct DataConfig {
  std::size_t steps = 50000;
  plant::ExcitationConfig excitation;
  forecast::SplitFractions split;
};

/// One target pair at one episode length.
struct Scenario {
  double width = 480.0;
  double thickness = 3.0;
  std::size_t steps = 100;

  /// Directory-safe name, e.g. "w480.0_h3.0_n100".
  std::string name() const;
  /// Accepts the name() form or "480/3.0/100".
  static Scenario parse(const std::string& text);
  bool operator==(const Scenario&) const = default;
};

struct ExperimentConfig {
  std::size_t episodes = 100;
  std::size_t eval_episodes = 10;
  std::size_t seeds = 5;
  std::uint64_t seed_base = 0;
  std::vector<std::array<double, 2>> targets{{480.0, 3.0}, {380.0, 3.0}, {480.0, 2.2}, {380.0, 2.2}};
  std::vector<std::size_t> steps{100, 50};
  std::vector<std::string> grid_variants{"mpd-ppo"};
  std::vector<std::string> ablation_variants{"mpd-ppo",  "ppo-single-net", "ppo-multibranch-uniform-clip",
                                             "mpd-ppo-uniform-clip", "reward-1", "reward-2",
                                             "reward-3"};
  std::array<double, 2> ablation_target{480.0, 3.0};
  std::size_t ablation_steps = 100;
  std::uint64_t forecaster_seed = 0;
  /// "surrogate" (trained forecasters) or "plant" (the simulator itself).
  std::string environment = "surrogate";

  std::vector<Scenario> grid_scenarios() const;
  Scenario ablation_scenario() const;
  std::vector<std::uint64_t> seed_list() const;
  void validate() const;
};

struct Config {
  plant::PlantParams plant;
  DataConfig data;
  forecast::ForecasterConfig forecaster;
  env::EpisodeConfig episode;
  env::RewardConfig reward;
  ppo::AgentConfig agent;
  ExperimentConfig experiment;

  /// Runs every module's own validation.
  void validate() const;
};

/// Parses YAML text with sections plant, data, forecaster, env, reward,
/// agent and experiment. Unknown keys and ill-typed values throw
/// std::invalid_argument naming the dotted key.
Config parse_config(const std::string& yaml_text);
/// Missing file throws std::runtime_error with the path.
Config load_config(const std::filesystem::path& path);
/// Every accepted dotted key, sorted.
std::vector<std::string> config_keys();

}  // namespace mpd::bench
