#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpd/diff/adam.hpp"
#include "mpd/neuro/policy.hpp"
#include "mpd/ppo/buffer.hpp"

namespace mpd::ppo {

struct PpoUpdateConfig {
  double lr = 3e-4;
  std::size_t epochs = 10;
  std::size_t minibatch = 64;
  double lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;  // applied to the actor and the critic separately
  double adv_eps = 1e-8;
  bool standardize_advantages = true;
  /// Feed standardized Monte Carlo returns to the surrogate instead of GAE
  /// advantages. Value targets are unaffected.
  bool standardize_returns = false;
  std::size_t episodes_per_update = 1;
  /// Treat episode ends (success or step limit) as truncations of a
  /// continuing process and bootstrap them with V(s_{t+1}) instead of 0.
  bool bootstrap_episode_end = true;
  /// Linear decay of the learning rate to zero over the training run.
  bool anneal_lr = false;
  /// Stop the remaining epochs of an update once the mean approximate KL of a
  /// minibatch exceeds this value; 0 disables the check.
  double target_kl = 0.0;

  void validate() const;
};

struct AgentConfig {
  neuro::PolicyConfig policy;
  std::vector<std::size_t> critic_trunk{64, 64};
  /// One value head and one advantage stream shared by every branch.
  bool shared_advantage = false;
  /// Per-feature multipliers applied to the environment state before both
  /// networks. Empty means identity.
  std::vector<double> state_scale;
  PpoUpdateConfig ppo;

  std::size_t heads() const { return shared_advantage ? 1 : policy.branches.size(); }
  void validate() const;
};

nlohmann::json to_json(const AgentConfig& cfg);
AgentConfig agent_config_from_json(const nlohmann::json& doc);

struct ActResult {
  std::vector<double> action;
  std::vector<double> log_probs;  // per branch
  std::vector<double> values;     // per head
};

/// Per-branch advantage streams over a buffer, in transition order.
struct AdvantageBatch {
  std::vector<std::vector<double>> returns;     // G_t^i, value targets
  std::vector<std::vector<double>> advantages;  // fed to the surrogate
  std::vector<std::vector<double>> raw_advantages;
};

/// Gathered rows of a buffer, already scaled.
struct Minibatch {
  std::size_t rows = 0;
  std::vector<double> states;                      // rows x state_dim
  std::vector<std::vector<double>> actions;        // per branch, rows x dims_i
  std::vector<std::vector<double>> old_log_probs;  // per branch
  std::vector<std::vector<double>> advantages;     // per branch
  std::vector<std::vector<double>> returns;        // per head
};

struct LossReport {
  diff::Tensor total;
  std::vector<double> surrogate;      // per branch, mean clipped objective
  std::vector<double> clip_fraction;  // per branch, share of samples where clipping bound
  std::vector<double> mean_ratio;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
};

struct UpdateStats {
  std::size_t samples = 0;
  std::size_t minibatches = 0;
  bool stopped_early = false;
  std::vector<double> surrogate;  // per branch, averaged over minibatches
  std::vector<double> clip_fraction;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double policy_grad_norm = 0.0;  // mean pre-clip norm
  double critic_grad_norm = 0.0;
  /// First minibatch of the first epoch, before any step was taken.
  std::vector<double> first_surrogate;
  std::vector<double> first_mean_advantage;
};

/// Multi-branch Gaussian actor plus multi-head critic trained with the
/// per-branch clipped surrogate.
class Agent {
 public:
  Agent(AgentConfig config, std::uint64_t seed);
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  ActResult act(std::span<const double> state, std::mt19937_64& rng) const;
  /// Critic values of a raw environment state.
  std::vector<double> values(std::span<const double> state) const;
  std::vector<double> greedy(std::span<const double> state) const;

  /// Value head used by branch i.
  std::size_t head_for(std::size_t branch) const;
  RolloutBuffer make_buffer() const;

  AdvantageBatch advantages(const RolloutBuffer& buffer) const;
  Minibatch gather(const RolloutBuffer& buffer, const AdvantageBatch& adv, std::span<const std::size_t> rows) const;
  LossReport evaluate_losses(diff::Tape& tape, const Minibatch& mb) const;
  /// Current-policy probability ratios of every stored action, per branch.
  std::vector<std::vector<double>> ratios(const RolloutBuffer& buffer) const;

  /// K epochs of shuffled minibatch steps, then the buffer is cleared.
  /// Throws std::logic_error if the buffer is not ready and
  /// std::runtime_error on a non-finite loss.
  UpdateStats update(RolloutBuffer& buffer, std::mt19937_64& rng);
  /// Multiplier on the configured learning rate (used for annealing).
  void set_lr_scale(double scale);

  const AgentConfig& config() const { return config_; }
  const neuro::PolicyNetwork& policy() const { return *policy_; }
  const neuro::CriticNetwork& critic() const { return *critic_; }
  neuro::PolicyNetwork& policy() { return *policy_; }
  neuro::CriticNetwork& critic() { return *critic_; }

  /// Combined "policy." / "critic." parameter view.
  diff::ParameterList parameters() const;
  std::string fingerprint() const;
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  void save(const std::filesystem::path& path, nlohmann::json metadata = nlohmann::json::object()) const;
  static std::unique_ptr<Agent> load(const std::filesystem::path& path);

 private:
  std::vector<double> scaled(std::span<const double> state) const;

  AgentConfig config_;
  std::unique_ptr<neuro::PolicyNetwork> policy_;
  std::unique_ptr<neuro::CriticNetwork> critic_;
  std::unique_ptr<diff::Adam> policy_opt_;
  std::unique_ptr<diff::Adam> critic_opt_;
  double lr_scale_ = 1.0;
};

}  // namespace mpd::ppo
