#include "mpd/ppo/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mpd/diff/ops.hpp"
#include "mpd/neuro/checkpoint.hpp"
#include "mpd/neuro/gaussian.hpp"
#include "mpd/ppo/advantage.hpp"

namespace mpd::ppo {

namespace {

constexpr const char* kAgentFormat = "mpd-agent-v1";

}  // namespace

void PpoUpdateConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("agent." + field + " " + why);
  };
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (minibatch < 1) fail("minibatch", "must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda", "must lie in [0, 1]");
  if (!(value_coef >= 0.0)) fail("value_coef", "must be >= 0");
  if (!(entropy_coef >= 0.0)) fail("entropy_coef", "must be >= 0");
  if (!(max_grad_norm > 0.0)) fail("max_grad_norm", "must be > 0");
  if (!(adv_eps > 0.0)) fail("adv_eps", "must be > 0");
  if (episodes_per_update < 1) fail("episodes_per_update", "must be >= 1");
  if (!(target_kl >= 0.0)) fail("target_kl", "must be >= 0");
}

void AgentConfig::validate() const {
  neuro::validate_branches(policy.branches);
  ppo.validate();
  if (policy.state_dim == 0) throw std::invalid_argument("agent.state_dim must be >= 1");
  if (!state_scale.empty() && state_scale.size() != policy.state_dim) {
    throw std::invalid_argument("agent.state_scale has " + std::to_string(state_scale.size()) +
                                " entries, expected " + std::to_string(policy.state_dim));
  }
  for (double s : state_scale)
    if (!std::isfinite(s)) throw std::invalid_argument("agent.state_scale entries must be finite");
}

nlohmann::json to_json(const AgentConfig& cfg) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : cfg.policy.branches) {
    branches.push_back({{"name", b.name},
                        {"action_dims", b.action_dims},
                        {"clip_epsilon", b.clip_epsilon},
                        {"discount", b.discount},
                        {"loss_weight", b.loss_weight},
                        {"init_sigma", b.init_sigma},
                        {"hidden_sizes", b.hidden_sizes}});
  }
  const auto& p = cfg.ppo;
  return {{"state_dim", cfg.policy.state_dim},
          {"trunk_sizes", cfg.policy.trunk_sizes},
          {"branches", branches},
          {"critic_trunk", cfg.critic_trunk},
          {"shared_advantage", cfg.shared_advantage},
          {"state_scale", cfg.state_scale},
          {"ppo",
           {{"lr", p.lr},
            {"epochs", p.epochs},
            {"minibatch", p.minibatch},
            {"lambda", p.lambda},
            {"value_coef", p.value_coef},
            {"entropy_coef", p.entropy_coef},
            {"max_grad_norm", p.max_grad_norm},
            {"adv_eps", p.adv_eps},
            {"standardize_advantages", p.standardize_advantages},
            {"standardize_returns", p.standardize_returns},
            {"episodes_per_update", p.episodes_per_update},
            {"bootstrap_episode_end", p.bootstrap_episode_end},
            {"anneal_lr", p.anneal_lr},
            {"target_kl", p.target_kl}}}};
}

AgentConfig agent_config_from_json(const nlohmann::json& doc) {
  AgentConfig cfg;
  cfg.policy.state_dim = doc.at("state_dim").get<std::size_t>();
  cfg.policy.trunk_sizes = doc.at("trunk_sizes").get<std::vector<std::size_t>>();
  cfg.policy.branches.clear();
  for (const auto& b : doc.at("branches")) {
    neuro::BranchSpec s;
    s.name = b.at("name").get<std::string>();
    s.action_dims = b.at("action_dims").get<std::size_t>();
    s.clip_epsilon = b.at("clip_epsilon").get<double>();
    s.discount = b.at("discount").get<double>();
    s.loss_weight = b.at("loss_weight").get<double>();
    s.init_sigma = b.at("init_sigma").get<double>();
    s.hidden_sizes = b.at("hidden_sizes").get<std::vector<std::size_t>>();
    cfg.policy.branches.push_back(std::move(s));
  }
  cfg.critic_trunk = doc.at("critic_trunk").get<std::vector<std::size_t>>();
  cfg.shared_advantage = doc.at("shared_advantage").get<bool>();
  cfg.state_scale = doc.at("state_scale").get<std::vector<double>>();
  const auto& p = doc.at("ppo");
  cfg.ppo.lr = p.at("lr").get<double>();
  cfg.ppo.epochs = p.at("epochs").get<std::size_t>();
  cfg.ppo.minibatch = p.at("minibatch").get<std::size_t>();
  cfg.ppo.lambda = p.at("lambda").get<double>();
  cfg.ppo.value_coef = p.at("value_coef").get<double>();
  cfg.ppo.entropy_coef = p.at("entropy_coef").get<double>();
  cfg.ppo.max_grad_norm = p.at("max_grad_norm").get<double>();
  cfg.ppo.adv_eps = p.at("adv_eps").get<double>();
  cfg.ppo.standardize_advantages = p.at("standardize_advantages").get<bool>();
  cfg.ppo.standardize_returns = p.at("standardize_returns").get<bool>();
  cfg.ppo.episodes_per_update = p.at("episodes_per_update").get<std::size_t>();
  cfg.ppo.bootstrap_episode_end = p.at("bootstrap_episode_end").get<bool>();
  cfg.ppo.anneal_lr = p.at("anneal_lr").get<bool>();
  cfg.ppo.target_kl = p.at("target_kl").get<double>();
  return cfg;
}

Agent::Agent(AgentConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  policy_ = std::make_unique<neuro::PolicyNetwork>(config_.policy, rng);
  neuro::CriticConfig cc;
  cc.state_dim = config_.policy.state_dim;
  cc.trunk_sizes = config_.critic_trunk;
  cc.heads = config_.heads();
  critic_ = std::make_unique<neuro::CriticNetwork>(cc, rng);
  diff::AdamOptions opt;
  opt.lr = config_.ppo.lr;
  policy_opt_ = std::make_unique<diff::Adam>(policy_->parameters(), opt);
  critic_opt_ = std::make_unique<diff::Adam>(critic_->parameters(), opt);
}

std::vector<double> Agent::scaled(std::span<const double> state) const {
  std::vector<double> s(state.begin(), state.end());
  if (!config_.state_scale.empty()) {
    if (s.size() != config_.state_scale.size()) {
      throw std::invalid_argument("agent: state has " + std::to_string(s.size()) + " entries, expected " +
                                  std::to_string(config_.state_scale.size()));
    }
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= config_.state_scale[i];
  }
  return s;
}

ActResult Agent::act(std::span<const double> state, std::mt19937_64& rng) const {
  const auto s = scaled(state);
  const auto dists = policy_->distributions(s);
  ActResult r;
  r.action = neuro::sample_action(dists, rng);
  r.log_probs = neuro::log_prob(dists, r.action);
  r.values = critic_->values(s);
  return r;
}

std::vector<double> Agent::values(std::span<const double> state) const { return critic_->values(scaled(state)); }

std::vector<double> Agent::greedy(std::span<const double> state) const {
  return neuro::mean_action(policy_->distributions(scaled(state)));
}

std::size_t Agent::head_for(std::size_t branch) const {
  if (branch >= config_.policy.branches.size()) throw std::out_of_range("agent: branch index out of range");
  return config_.shared_advantage ? 0 : branch;
}

RolloutBuffer Agent::make_buffer() const {
  return RolloutBuffer(config_.ppo.episodes_per_update, policy_->branch_count(), config_.heads());
}

AdvantageBatch Agent::advantages(const RolloutBuffer& buffer) const {
  const auto& tr = buffer.transitions();
  if (tr.empty()) throw std::logic_error("agent: advantages of an empty buffer");
  std::vector<double> rewards;
  std::vector<bool> dones_v;
  for (const auto& t : tr) {
    rewards.push_back(t.reward);
    dones_v.push_back(t.done);
  }
  // std::vector<bool> has no contiguous storage; copy into a span-able array.
  std::unique_ptr<bool[]> dones(new bool[tr.size()]);
  std::copy(dones_v.begin(), dones_v.end(), dones.get());
  const std::span<const bool> done_span(dones.get(), tr.size());

  const std::size_t heads = config_.heads();
  std::vector<GaeResult> per_head(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<double> values;
    for (const auto& t : tr) values.push_back(t.old_values.at(h));
    const double gamma = config_.policy.branches[h].discount;
    if (!config_.ppo.bootstrap_episode_end) {
      per_head[h] = gae_advantages(rewards, values, done_span, gamma, config_.ppo.lambda);
      continue;
    }
    // Each episode is its own segment, bootstrapped from V(s_T).
    std::size_t begin = 0;
    while (begin < tr.size()) {
      std::size_t end = begin;
      while (end < tr.size() && !tr[end].done) ++end;
      const bool closed = end < tr.size();
      if (closed) ++end;
      double last = 0.0;
      if (closed) {
        const auto& nv = tr[end - 1].next_values;
        if (nv.size() != heads) throw std::logic_error("agent: episode end is missing its bootstrap values");
        last = nv[h];
      }
      std::unique_ptr<bool[]> flags(new bool[end - begin]());
      const auto seg = gae_advantages(std::span<const double>(rewards).subspan(begin, end - begin),
                                      std::span<const double>(values).subspan(begin, end - begin),
                                      std::span<const bool>(flags.get(), end - begin), gamma, config_.ppo.lambda, last);
      per_head[h].advantages.insert(per_head[h].advantages.end(), seg.advantages.begin(), seg.advantages.end());
      per_head[h].returns.insert(per_head[h].returns.end(), seg.returns.begin(), seg.returns.end());
      begin = end;
    }
  }

  AdvantageBatch out;
  for (std::size_t i = 0; i < policy_->branch_count(); ++i) {
    const auto& g = per_head[head_for(i)];
    out.raw_advantages.push_back(g.advantages);
    out.returns.push_back(g.returns);
    if (config_.ppo.standardize_returns) {
      out.advantages.push_back(
          standardize(discounted_returns(rewards, done_span, config_.policy.branches[i].discount), config_.ppo.adv_eps));
    } else if (config_.ppo.standardize_advantages) {
      out.advantages.push_back(standardize(g.advantages, config_.ppo.adv_eps));
    } else {
      out.advantages.push_back(g.advantages);
    }
  }
  return out;
}

Minibatch Agent::gather(const RolloutBuffer& buffer, const AdvantageBatch& adv,
                        std::span<const std::size_t> rows) const {
  const auto& tr = buffer.transitions();
  const std::size_t nb = policy_->branch_count();
  Minibatch mb;
  mb.rows = rows.size();
  mb.actions.resize(nb);
  mb.old_log_probs.resize(nb);
  mb.advantages.resize(nb);
  mb.returns.resize(config_.heads());
  for (std::size_t r : rows) {
    const auto& t = tr.at(r);
    const auto s = scaled(t.state);
    mb.states.insert(mb.states.end(), s.begin(), s.end());
    for (std::size_t i = 0; i < nb; ++i) {
      const auto off = policy_->action_offset(i);
      const auto d = config_.policy.branches[i].action_dims;
      mb.actions[i].insert(mb.actions[i].end(), t.action.begin() + static_cast<std::ptrdiff_t>(off),
                           t.action.begin() + static_cast<std::ptrdiff_t>(off + d));
      mb.old_log_probs[i].push_back(t.old_log_probs[i]);
      mb.advantages[i].push_back(adv.advantages[i][r]);
    }
    for (std::size_t h = 0; h < config_.heads(); ++h) {
      // Every branch sharing a head shares its targets; take the first.
      std::size_t branch = 0;
      while (head_for(branch) != h) ++branch;
      mb.returns[h].push_back(adv.returns[branch][r]);
    }
  }
  return mb;
}

LossReport Agent::evaluate_losses(diff::Tape& tape, const Minibatch& mb) const {
  using diff::Tensor;
  const std::size_t B = mb.rows;
  if (B == 0) throw std::invalid_argument("evaluate_losses: empty minibatch");
  const std::size_t S = config_.policy.state_dim;
  const Tensor states = Tensor::matrix(B, S, mb.states);
  const auto out = policy_->forward(tape, states);

  LossReport rep;
  Tensor total;
  auto accumulate = [&](const Tensor& term) { total = total.defined() ? diff::add(tape, total, term) : term; };

  double kl = 0.0;
  for (std::size_t i = 0; i < policy_->branch_count(); ++i) {
    const auto& spec = config_.policy.branches[i];
    const Tensor actions = Tensor::matrix(B, spec.action_dims, mb.actions[i]);
    const Tensor old_lp = Tensor::matrix(B, 1, mb.old_log_probs[i]);
    const Tensor adv = Tensor::matrix(B, 1, mb.advantages[i]);
    const Tensor new_lp = neuro::gaussian_log_prob(tape, out.means[i], out.log_stds[i], actions);
    const Tensor log_ratio = diff::sub(tape, new_lp, old_lp);
    const Tensor ratio = diff::exp(tape, log_ratio);
    const Tensor unclipped = diff::mul(tape, ratio, adv);
    const Tensor clipped =
        diff::mul(tape, diff::clip(tape, ratio, 1.0 - spec.clip_epsilon, 1.0 + spec.clip_epsilon), adv);
    const Tensor objective = diff::mean(tape, diff::minimum(tape, unclipped, clipped));
    rep.surrogate.push_back(objective.item());

    const auto uv = unclipped.values();
    const auto cv = clipped.values();
    const auto rv = ratio.values();
    const auto lr = log_ratio.values();
    std::size_t bound = 0;
    double ratio_sum = 0.0;
    for (std::size_t k = 0; k < B; ++k) {
      if (cv[k] < uv[k]) ++bound;
      ratio_sum += rv[k];
      kl += (rv[k] - 1.0) - lr[k];
    }
    rep.clip_fraction.push_back(static_cast<double>(bound) / static_cast<double>(B));
    rep.mean_ratio.push_back(ratio_sum / static_cast<double>(B));
    if (spec.loss_weight > 0.0) accumulate(diff::scale(tape, objective, -spec.loss_weight));
  }
  rep.approx_kl = kl / static_cast<double>(B * policy_->branch_count());

  Tensor entropy;
  for (const auto& ls : out.log_stds) {
    const Tensor e = neuro::gaussian_entropy(tape, ls);
    entropy = entropy.defined() ? diff::add(tape, entropy, e) : e;
  }
  rep.entropy = entropy.item();
  if (config_.ppo.entropy_coef > 0.0) accumulate(diff::scale(tape, entropy, -config_.ppo.entropy_coef));

  const std::size_t H = config_.heads();
  std::vector<double> targets(B * H);
  for (std::size_t k = 0; k < B; ++k)
    for (std::size_t h = 0; h < H; ++h) targets[k * H + h] = mb.returns[h][k];
  const Tensor values = critic_->forward(tape, states);
  const Tensor vf = diff::mean(tape, diff::square(tape, diff::sub(tape, values, Tensor::matrix(B, H, targets))));
  rep.value_loss = vf.item();
  if (config_.ppo.value_coef > 0.0) accumulate(diff::scale(tape, vf, config_.ppo.value_coef));

  rep.total = total.defined() ? total : diff::scale(tape, vf, 0.0);
  return rep;
}

std::vector<std::vector<double>> Agent::ratios(const RolloutBuffer& buffer) const {
  std::vector<std::vector<double>> out(policy_->branch_count());
  for (const auto& t : buffer.transitions()) {
    const auto dists = policy_->distributions(scaled(t.state));
    const auto lp = neuro::log_prob(dists, t.action);
    for (std::size_t i = 0; i < lp.size(); ++i) out[i].push_back(std::exp(lp[i] - t.old_log_probs[i]));
  }
  return out;
}

UpdateStats Agent::update(RolloutBuffer& buffer, std::mt19937_64& rng) {
  if (!buffer.ready()) {
    throw std::logic_error("agent update: buffer holds " + std::to_string(buffer.completed_episodes()) +
                           " complete episode(s), threshold is " + std::to_string(buffer.episode_threshold()));
  }
  const auto adv = advantages(buffer);
  const std::size_t n = buffer.size();
  const std::size_t nb = policy_->branch_count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  policy_opt_->options().lr = config_.ppo.lr * lr_scale_;
  critic_opt_->options().lr = config_.ppo.lr * lr_scale_;

  UpdateStats st;
  st.samples = n;
  st.surrogate.assign(nb, 0.0);
  st.clip_fraction.assign(nb, 0.0);
  for (std::size_t epoch = 0; epoch < config_.ppo.epochs && !st.stopped_early; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config_.ppo.minibatch) {
      const std::size_t end = std::min(n, start + config_.ppo.minibatch);
      const auto mb = gather(buffer, adv, std::span<const std::size_t>(order.data() + start, end - start));
      diff::Tape tape;
      const auto rep = evaluate_losses(tape, mb);
      const double loss = rep.total.item();
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "agent update: non-finite loss at epoch " << epoch << ", minibatch " << start / config_.ppo.minibatch
            << " (value loss " << rep.value_loss << ", entropy " << rep.entropy;
        for (std::size_t i = 0; i < nb; ++i) msg << ", surrogate[" << i << "] " << rep.surrogate[i];
        msg << ")";
        throw std::runtime_error(msg.str());
      }
      if (st.minibatches == 0) {
        st.first_surrogate = rep.surrogate;
        for (std::size_t i = 0; i < nb; ++i) {
          const auto& a = mb.advantages[i];
          st.first_mean_advantage.push_back(std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size()));
        }
      }
      tape.backward(rep.total);
      st.policy_grad_norm += policy_opt_->clip_grad_norm(config_.ppo.max_grad_norm);
      st.critic_grad_norm += critic_opt_->clip_grad_norm(config_.ppo.max_grad_norm);
      policy_opt_->step();
      critic_opt_->step();

      ++st.minibatches;
      for (std::size_t i = 0; i < nb; ++i) {
        st.surrogate[i] += rep.surrogate[i];
        st.clip_fraction[i] += rep.clip_fraction[i];
      }
      st.value_loss += rep.value_loss;
      st.entropy += rep.entropy;
      st.approx_kl += rep.approx_kl;
      if (config_.ppo.target_kl > 0.0 && rep.approx_kl > config_.ppo.target_kl) {
        st.stopped_early = true;
        break;
      }
    }
  }
  const double m = static_cast<double>(st.minibatches);
  for (std::size_t i = 0; i < nb; ++i) {
    st.surrogate[i] /= m;
    st.clip_fraction[i] /= m;
  }
  st.value_loss /= m;
  st.entropy /= m;
  st.approx_kl /= m;
  st.policy_grad_norm /= m;
  st.critic_grad_norm /= m;
  buffer.clear();
  return st;
}

void Agent::set_lr_scale(double scale) {
  if (!(scale >= 0.0 && std::isfinite(scale))) throw std::invalid_argument("agent: learning-rate scale must be >= 0");
  lr_scale_ = scale;
}

diff::ParameterList Agent::parameters() const {
  diff::ParameterList all;
  all.append(policy_->parameters(), "policy.");
  all.append(critic_->parameters(), "critic.");
  return all;
}

std::string Agent::fingerprint() const { return policy_->fingerprint() + "|" + critic_->fingerprint(); }

std::vector<std::vector<double>> Agent::snapshot() const {
  std::vector<std::vector<double>> out;
  const auto params = parameters();
  for (const auto& e : params.entries()) {
    const auto v = e.tensor.values();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

void Agent::restore(const std::vector<std::vector<double>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw std::invalid_argument("agent restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto t = params.entries()[i].tensor;
    auto dst = t.mutable_values();
    if (dst.size() != values[i].size()) throw std::invalid_argument("agent restore: size mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void Agent::save(const std::filesystem::path& path, nlohmann::json metadata) const {
  metadata["format"] = kAgentFormat;
  metadata["agent"] = to_json(config_);
  neuro::save_checkpoint(path, parameters(), fingerprint(), std::move(metadata));
}

std::unique_ptr<Agent> Agent::load(const std::filesystem::path& path) {
  const auto doc = neuro::read_json_file(path);
  const auto& meta = doc.at("metadata");
  if (meta.value("format", std::string()) != kAgentFormat) {
    throw std::runtime_error("agent checkpoint " + path.string() + " has an unexpected format");
  }
  auto agent = std::make_unique<Agent>(agent_config_from_json(meta.at("agent")), 0);
  auto params = agent->parameters();
  neuro::restore_checkpoint(doc, params, agent->fingerprint());
  return agent;
}

}  // namespace mpd::ppo
