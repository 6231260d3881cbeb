#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace mpd::env {

inline constexpr std::size_t kObjectives = 2;  // width, thickness

struct RewardConfig {
  double error_coef = 2.0;
  double progress_coef = 0.3;
  double action_coef = 0.05;
  double steady_coef = 0.5;
  double steady_threshold = 1.0;  // tau, in tolerance units
  /// Apply the steady-state term only while e_t < tau.
  bool gate_steady = true;
  std::array<double, kObjectives> weights{0.5, 0.5};
  double clip_lo = -5.0;
  double clip_hi = 5.0;
  // Component switches for the reward ablations; the error term is always on.
  bool use_progress = true;
  bool use_action = true;
  bool use_steady = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Per-objective tracking state. Errors are normalized by the tolerance.
struct ObjectiveState {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 1.0;
  double error = 0.0;       // e_t = |y - target| / tolerance
  double best_error = 0.0;  // min e over this episode, before the current step
  std::vector<double> control;       // set-points of this objective's actuators, action units
  std::vector<double> prev_control;

  double signed_error() const { return (value - target) / tolerance; }
};

struct RewardComponents {
  double error = 0.0;     // R_e
  double progress = 0.0;  // R_p
  double action = 0.0;    // P_a
  double steady = 0.0;    // R_s
  double sum() const { return error + progress + action + steady; }
};

/// R_e = c_e exp(-e), R_p = c_p tanh(e_best - e), P_a = -c_a sum (a - a_prev)^2,
/// R_s = c_s (tau - e) (only while e < tau when gated). Disabled components are 0.
RewardComponents reward_components(const ObjectiveState& obj, const RewardConfig& cfg);

/// clip(sum_i w_i * components_i.sum(), lo, hi)
double total_reward(std::span<const RewardComponents> per_objective, const RewardConfig& cfg);

/// Normalizes to sum 1. Throws on negative or all-zero weights.
std::array<double, kObjectives> normalize_weights(std::array<double, kObjectives> w);

}  // namespace mpd::env
