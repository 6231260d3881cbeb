#include "mpd/env/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpd::env {

void RewardConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* why) {
    if (!ok) throw std::invalid_argument(std::string("reward.") + field + " " + why);
  };
  require(error_coef >= 0.0, "error_coef", "must be >= 0");
  require(progress_coef >= 0.0, "progress_coef", "must be >= 0");
  require(action_coef >= 0.0, "action_coef", "must be >= 0");
  require(steady_coef >= 0.0, "steady_coef", "must be >= 0");
  require(steady_threshold >= 0.0, "steady_threshold", "must be >= 0");
  require(clip_lo < clip_hi, "total_clip", "needs lo < hi");
  normalize_weights(weights);
}

RewardComponents reward_components(const ObjectiveState& obj, const RewardConfig& cfg) {
  RewardComponents c;
  const double e = obj.error;
  c.error = cfg.error_coef * std::exp(-e);
  if (cfg.use_progress) c.progress = cfg.progress_coef * std::tanh(obj.best_error - e);
  if (cfg.use_action) {
    if (obj.control.size() != obj.prev_control.size()) {
      throw std::invalid_argument("reward_components: control/prev_control size mismatch");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < obj.control.size(); ++i) {
      const double d = obj.control[i] - obj.prev_control[i];
      sq += d * d;
    }
    c.action = -cfg.action_coef * sq;
  }
  if (cfg.use_steady && (!cfg.gate_steady || e < cfg.steady_threshold)) {
    c.steady = cfg.steady_coef * (cfg.steady_threshold - e);
  }
  return c;
}

double total_reward(std::span<const RewardComponents> per_objective, const RewardConfig& cfg) {
  if (per_objective.size() != kObjectives) {
    throw std::invalid_argument("total_reward: expected one component set per objective");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < kObjectives; ++i) r += cfg.weights[i] * per_objective[i].sum();
  return std::clamp(r, cfg.clip_lo, cfg.clip_hi);
}

std::array<double, kObjectives> normalize_weights(std::array<double, kObjectives> w) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("objective weights must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("objective weights must not all be zero");
  for (double& v : w) v /= total;
  return w;
}

}  // namespace mpd::env
