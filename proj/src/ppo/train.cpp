#include "mpd/ppo/train.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace mpd::ppo {

TrainResult train(env::Environment& env, Agent& agent, const TrainOptions& options, std::mt19937_64& rng) {
  if (env.state_dim() != agent.config().policy.state_dim) {
    throw std::invalid_argument("train: environment state has " + std::to_string(env.state_dim()) +
                                " entries, agent expects " + std::to_string(agent.config().policy.state_dim));
  }
  TrainResult result;
  auto buffer = agent.make_buffer();
  double best = std::numeric_limits<double>::infinity();
  double window_sum = 0.0;
  for (std::size_t ep = 1; ep <= options.episodes; ++ep) {
    if (agent.config().ppo.anneal_lr) {
      agent.set_lr_scale(1.0 - static_cast<double>(ep - 1) / static_cast<double>(options.episodes));
    }
    auto state = env.reset();
    EpisodeRecord rec;
    rec.episode = ep;
    while (true) {
      auto act = agent.act(state, rng);
      auto step = env.step(act.action);
      rec.total_reward += step.reward;
      rec.width_error = step.info.width_error;
      rec.thickness_error = step.info.thickness_error;
      rec.success = step.info.success;
      TransitionTuple t;
      t.state = std::move(state);
      t.action = std::move(act.action);
      t.reward = step.reward;
      t.next_state = step.state;
      t.done = step.done;
      t.old_log_probs = std::move(act.log_probs);
      t.old_values = std::move(act.values);
      if (step.done) t.next_values = agent.values(step.state);
      buffer.add(std::move(t));
      if (step.done) break;
      state = std::move(step.state);
    }
    rec.optimize_step = rec.success ? env.steps() : env.episode_config().max_steps;

    UpdateStats stats;
    const bool updated = buffer.ready();
    if (updated) stats = agent.update(buffer, rng);
    result.curve.push_back(rec);

    window_sum += static_cast<double>(rec.optimize_step);
    if (ep > options.best_window) window_sum -= static_cast<double>(result.curve[ep - 1 - options.best_window].optimize_step);
    if (ep >= std::min(options.best_window, options.episodes)) {
      const double mean = window_sum / static_cast<double>(std::min(ep, options.best_window));
      if (mean <= best) {
        best = mean;
        result.best_episode = ep;
        result.best_window_mean = mean;
        result.best_parameters = agent.snapshot();
      }
    }
    if (options.on_episode) options.on_episode(rec, updated ? &stats : nullptr);
  }
  return result;
}

std::vector<env::EpisodeSummary> evaluate(env::Environment& env, const Agent& agent, std::size_t episodes,
                                          bool keep_trace) {
  std::vector<env::EpisodeSummary> out;
  const env::PolicyFn policy = [&agent](std::span<const double> s) { return agent.greedy(s); };
  for (std::size_t i = 0; i < episodes; ++i) out.push_back(env::run_episode(env, policy, keep_trace));
  return out;
}

double mean_optimize_step(const std::vector<env::EpisodeSummary>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("mean_optimize_step: no episodes");
  double s = 0.0;
  for (const auto& e : episodes) s += static_cast<double>(e.optimize_step);
  return s / static_cast<double>(episodes.size());
}

void write_curve_csv(const std::filesystem::path& path, std::uint64_t seed, const std::vector<EpisodeRecord>& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "seed,episode,total_reward,optimize_step,width_err,thickness_err\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : curve) {
    out << seed << ',' << r.episode << ',' << r.total_reward << ',' << r.optimize_step << ',' << r.width_error << ','
        << r.thickness_error << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> variant_names() {
  return {kVariantMpdPpo, kVariantSingleNet, kVariantMultiBranchUniform, kVariantMpdUniform,
          "reward-1",     "reward-2",        "reward-3",                 "reward-4"};
}

void apply_variant(const std::string& name, AgentConfig& agent, env::RewardConfig& reward) {
  auto& branches = agent.policy.branches;
  if (name == kVariantMpdPpo || name == "reward-4") {
    reward.use_progress = reward.use_action = reward.use_steady = true;
    return;
  }
  if (name == "reward-1" || name == "reward-2" || name == "reward-3") {
    reward.use_progress = name != "reward-1";
    reward.use_action = name == "reward-3";
    reward.use_steady = false;
    return;
  }
  if (name == kVariantMpdUniform) {
    for (auto& b : branches) b.clip_epsilon = 0.15;
    return;
  }
  if (branches.size() < 2) throw std::invalid_argument("variant " + name + " needs the two-branch defaults");
  if (name == kVariantMultiBranchUniform) {
    agent.shared_advantage = true;
    for (auto& b : branches) b.clip_epsilon = branches.front().clip_epsilon;
    return;
  }
  if (name == kVariantSingleNet) {
    neuro::BranchSpec joint = branches.front();
    joint.name = "joint";
    joint.action_dims = 0;
    double sigma = 0.0;
    for (const auto& b : branches) {
      joint.action_dims += b.action_dims;
      sigma += b.init_sigma * static_cast<double>(b.action_dims);
    }
    joint.init_sigma = sigma / static_cast<double>(joint.action_dims);
    joint.loss_weight = 1.0;
    branches = {joint};
    agent.shared_advantage = true;
    return;
  }
  throw std::invalid_argument("unknown variant '" + name + "'");
}

}  // namespace mpd::ppo
