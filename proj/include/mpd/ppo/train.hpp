#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mpd/env/env.hpp"
#include "mpd/ppo/agent.hpp"

namespace mpd::ppo {

struct EpisodeRecord {
  std::size_t episode = 0;  // 1-based
  double total_reward = 0.0;
  std::size_t optimize_step = 0;
  double width_error = 0.0;
  double thickness_error = 0.0;
  bool success = false;
};

struct TrainOptions {
  std::size_t episodes = 100;
  /// Window of training episodes whose mean optimize step ranks snapshots.
  std::size_t best_window = 10;
  std::function<void(const EpisodeRecord&, const UpdateStats*)> on_episode;
};

struct TrainResult {
  std::vector<EpisodeRecord> curve;
  std::vector<std::vector<double>> best_parameters;
  std::size_t best_episode = 0;
  double best_window_mean = 0.0;
};

/// Interaction, storage and update loop. The episode length comes from the
/// environment's configuration. Action noise and minibatch shuffling draw
/// from `rng`.
TrainResult train(env::Environment& env, Agent& agent, const TrainOptions& options, std::mt19937_64& rng);

/// Greedy (mean-action) rollouts.
std::vector<env::EpisodeSummary> evaluate(env::Environment& env, const Agent& agent, std::size_t episodes,
                                          bool keep_trace = false);
double mean_optimize_step(const std::vector<env::EpisodeSummary>& episodes);

/// Learning-curve file: seed, episode, total_reward, optimize_step, width_err, thickness_err.
void write_curve_csv(const std::filesystem::path& path, std::uint64_t seed, const std::vector<EpisodeRecord>& curve);

// Named agent / reward configurations compared in the ablations.
inline constexpr const char* kVariantMpdPpo = "mpd-ppo";
inline constexpr const char* kVariantSingleNet = "ppo-single-net";
inline constexpr const char* kVariantMultiBranchUniform = "ppo-multibranch-uniform-clip";
inline constexpr const char* kVariantMpdUniform = "mpd-ppo-uniform-clip";

std::vector<std::string> variant_names();
/// Rewrites `agent` and `reward` in place for the named variant, starting
/// from the caller's defaults. Throws std::invalid_argument on unknown names.
void apply_variant(const std::string& name, AgentConfig& agent, env::RewardConfig& reward);

}  // namespace mpd::ppo
