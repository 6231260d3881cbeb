#include "mpd/ppo/buffer.hpp"

#include <stdexcept>
#include <string>

namespace mpd::ppo {

RolloutBuffer::RolloutBuffer(std::size_t episode_threshold, std::size_t branches, std::size_t heads)
    : threshold_(episode_threshold), branches_(branches), heads_(heads) {
  if (threshold_ == 0) throw std::invalid_argument("rollout buffer episode_threshold must be >= 1");
  if (branches_ == 0 || heads_ == 0) throw std::invalid_argument("rollout buffer needs >= 1 branch and head");
}

void RolloutBuffer::add(TransitionTuple t) {
  if (t.old_log_probs.size() != branches_) {
    throw std::invalid_argument("transition has " + std::to_string(t.old_log_probs.size()) +
                                " old log-probs, expected " + std::to_string(branches_));
  }
  if (t.old_values.size() != heads_) {
    throw std::invalid_argument("transition has " + std::to_string(t.old_values.size()) + " old values, expected " +
                                std::to_string(heads_));
  }
  if (!transitions_.empty() && t.state.size() != transitions_.front().state.size()) {
    throw std::invalid_argument("transition state size differs from the buffer's");
  }
  const bool done = t.done;
  transitions_.push_back(std::move(t));
  if (done) episode_ends_.push_back(transitions_.size());
}

void RolloutBuffer::clear() {
  transitions_.clear();
  episode_ends_.clear();
}

}  // namespace mpd::ppo
