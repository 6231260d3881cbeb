#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mpd/env/reward.hpp"
#include "mpd/forecast/model.hpp"
#include "mpd/plant/plant.hpp"

namespace mpd::env {

struct EpisodeConfig {
  double width_target = 480.0;
  double thickness_target = 3.0;
  double width_tolerance = 1.0;
  double thickness_tolerance = 0.05;
  std::size_t max_steps = 100;
  double knife_scale = 2.0;  // mm per unit action
  double gap_scale = 0.05;   // mm per unit action
  std::size_t history = 4;
  // Initial set-points are drawn around the nominal operating point and
  // redrawn until at least one objective starts clearly off target.
  double init_knife_offset = 12.0;
  double init_gap_offset = 0.3;
  double init_gap_split = 0.02;
  double min_width_error = 5.0;
  double min_thickness_error = 0.25;

  void validate() const;
};

/// dim = sum over objectives of (3 + history) + one entry per actuator.
std::size_t state_dim(std::size_t history);

/// What the environment queries for next-step width and thickness.
class Backend {
 public:
  struct Outputs {
    double width;
    double thickness;
  };
  virtual ~Backend() = default;
  /// Starts a fresh episode held at `u`; returns the current outputs.
  virtual Outputs reset(const plant::SetPoints& u) = 0;
  /// Applies new set-points for one interval; returns the next outputs.
  virtual Outputs step(const plant::SetPoints& u) = 0;
};

/// Trained forecasters over a synthesized input window. Auxiliary channels
/// follow the plant's AR(1) mean response to the set-points.
class SurrogateBackend : public Backend {
 public:
  SurrogateBackend(std::shared_ptr<const forecast::Forecaster> width, std::shared_ptr<const forecast::Forecaster> thickness,
                   plant::PlantParams params);
  Outputs reset(const plant::SetPoints& u) override;
  Outputs step(const plant::SetPoints& u) override;

  /// Current raw window [T x channels] over `channels()`.
  const std::vector<double>& window() const { return window_; }
  const std::vector<std::string>& channels() const { return channels_; }

 private:
  Outputs predict() const;
  std::vector<double> row_for(const plant::SetPoints& u, std::span<const double> prev_aux) const;

  std::shared_ptr<const forecast::Forecaster> width_, thickness_;
  plant::PlantParams params_;
  std::size_t T_ = 0;
  std::vector<std::string> channels_;  // set-points then auxiliaries
  std::vector<std::size_t> width_cols_, thickness_cols_;
  std::vector<double> window_;
};

/// The synthetic plant itself (noise included unless configured off).
class PlantBackend : public Backend {
 public:
  PlantBackend(plant::PlantParams params, std::uint64_t seed);
  Outputs reset(const plant::SetPoints& u) override;
  Outputs step(const plant::SetPoints& u) override;

 private:
  plant::PlantParams params_;
  std::mt19937_64 rng_;
  plant::PlantState state_;
};

struct StepInfo {
  double width = 0.0;
  double thickness = 0.0;
  double width_error = 0.0;      // mm, signed
  double thickness_error = 0.0;  // mm, signed
  std::array<RewardComponents, kObjectives> components{};
  std::vector<double> action;    // clamped, action units
  plant::SetPoints set;
  double reward = 0.0;
  bool success = false;
  bool done = false;
};

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Set-point control environment: actions are set-point increments, the
/// backend supplies next-step width and thickness, the reward follows the
/// composite shaping in reward.hpp.
class Environment {
 public:
  Environment(EpisodeConfig episode, RewardConfig reward, plant::PlantParams params, std::unique_ptr<Backend> backend,
              std::uint64_t seed);

  std::vector<double> reset();
  /// action = (knife, DS gap, OS gap) increments in [-1, 1] (clamped).
  StepResult step(std::span<const double> action);

  void set_objective_weights(std::array<double, kObjectives> weights);
  std::array<double, kObjectives> objective_weights() const { return reward_.weights; }

  std::size_t state_dim() const { return env::state_dim(episode_.history); }
  std::size_t steps() const { return steps_; }
  const ObjectiveState& objective(std::size_t i) const { return objectives_.at(i); }
  const plant::SetPoints& set_points() const { return set_; }
  /// Steady-state set-points that hit both targets with equal gaps.
  plant::SetPoints nominal_set_points() const { return nominal_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  const RewardConfig& reward_config() const { return reward_; }

 private:
  void observe(const Backend::Outputs& out);
  std::vector<double> build_state() const;

  EpisodeConfig episode_;
  RewardConfig reward_;
  plant::PlantParams params_;
  std::unique_ptr<Backend> backend_;
  std::mt19937_64 rng_;
  plant::SetPoints nominal_;
  plant::SetPoints set_;
  std::array<ObjectiveState, kObjectives> objectives_;
  std::array<std::vector<double>, kObjectives> error_history_;  // signed, most recent first
  std::array<double, kObjectives> delta_error_{};
  std::size_t steps_ = 0;
  bool active_ = false;
};

using PolicyFn = std::function<std::vector<double>(std::span<const double> state)>;

struct EpisodeSummary {
  std::size_t optimize_step = 0;  // step of first success, or max_steps on failure
  bool success = false;
  double total_reward = 0.0;
  double width_error = 0.0;      // mm at the last step, signed
  double thickness_error = 0.0;  // mm at the last step, signed
  std::vector<StepInfo> trace;
};

EpisodeSummary run_episode(Environment& env, const PolicyFn& policy, bool keep_trace = false);

/// Runs `policy` against the true plant instead of the forecasters.
EpisodeSummary oracle_eval(const PolicyFn& policy, const plant::PlantParams& params, const EpisodeConfig& episode,
                           const RewardConfig& reward, std::uint64_t seed, bool keep_trace = false);

/// Delimited-text episode trace.
void write_trace_csv(const std::filesystem::path& path, const EpisodeSummary& ep, const EpisodeConfig& cfg);

}  // namespace mpd::env
