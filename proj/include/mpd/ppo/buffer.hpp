#pragma once

#include <cstddef>
#include <vector>

namespace mpd::ppo {

struct TransitionTuple {
  std::vector<double> state;
  std::vector<double> action;  // concatenated branches, as sampled (before env clamping)
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  std::vector<double> old_log_probs;  // one per policy branch
  std::vector<double> old_values;     // one per critic head, V_i(s_t)
  /// V_i(s_{t+1}) per head; only read for the last transition of an episode
  /// when episode ends are bootstrapped.
  std::vector<double> next_values;
};

/// On-policy rollout storage. Becomes ready once `episode_threshold`
/// complete episodes are stored; cleared after each update.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t episode_threshold = 1, std::size_t branches = 2, std::size_t heads = 2);

  /// Throws if the per-branch / per-head arrays have the wrong length.
  void add(TransitionTuple t);
  void clear();

  bool ready() const { return completed_episodes() >= threshold_; }
  bool empty() const { return transitions_.empty(); }
  std::size_t size() const { return transitions_.size(); }
  std::size_t completed_episodes() const { return episode_ends_.size(); }
  std::size_t episode_threshold() const { return threshold_; }
  std::size_t branches() const { return branches_; }
  std::size_t heads() const { return heads_; }

  const std::vector<TransitionTuple>& transitions() const { return transitions_; }
  /// One-past-the-end index of every finished episode.
  const std::vector<std::size_t>& episode_ends() const { return episode_ends_; }

 private:
  std::size_t threshold_;
  std::size_t branches_;
  std::size_t heads_;
  std::vector<TransitionTuple> transitions_;
  std::vector<std::size_t> episode_ends_;
};

}  // namespace mpd::ppo
