#include "mpd/bench/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "mpd/ppo/train.hpp"

namespace mpd::bench {

namespace {

using Setter = std::function<void(Config&, const YAML::Node&, const std::string&)>;

template <class T>
T as(const YAML::Node& n, const std::string& key, const char* what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw std::invalid_argument(key + ": expected " + what);
  }
}

double as_double(const YAML::Node& n, const std::string& key) {
  const double v = as<double>(n, key, "a number");
  if (!std::isfinite(v)) throw std::invalid_argument(key + ": must be finite");
  return v;
}

std::size_t as_count(const YAML::Node& n, const std::string& key) {
  const auto v = as<long long>(n, key, "a non-negative integer");
  if (v < 0) throw std::invalid_argument(key + ": must be >= 0");
  return static_cast<std::size_t>(v);
}

template <class Get>
Setter real(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) { get(c) = as_double(n, k); };
}
template <class Get>
Setter count(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) { get(c) = as_count(n, k); };
}
template <class Get>
Setter flag(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) { get(c) = as<bool>(n, k, "true or false"); };
}
template <class Get>
Setter text(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) { get(c) = as<std::string>(n, k, "a string"); };
}
template <class Get>
Setter pair(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) {
    if (!n.IsSequence() || n.size() != 2) throw std::invalid_argument(k + ": expected a two-element list");
    get(c) = {as_double(n[0], k), as_double(n[1], k)};
  };
}
template <class Get>
Setter sizes(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) {
    if (!n.IsSequence()) throw std::invalid_argument(k + ": expected a list of integers");
    std::vector<std::size_t> v;
    for (const auto& e : n) v.push_back(as_count(e, k));
    get(c) = v;
  };
}
template <class Get>
Setter reals(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) {
    if (!n.IsSequence()) throw std::invalid_argument(k + ": expected a list of numbers");
    std::vector<double> v;
    for (const auto& e : n) v.push_back(as_double(e, k));
    get(c) = v;
  };
}
template <class Get>
Setter strings(Get get) {
  return [get](Config& c, const YAML::Node& n, const std::string& k) {
    if (!n.IsSequence()) throw std::invalid_argument(k + ": expected a list of strings");
    std::vector<std::string> v;
    for (const auto& e : n) v.push_back(as<std::string>(e, k, "a string"));
    get(c) = v;
  };
}

neuro::BranchSpec& branch(Config& c, const std::string& name, const std::string& key) {
  for (auto& b : c.agent.policy.branches)
    if (b.name == name) return b;
  throw std::invalid_argument(key + ": the agent has no branch named '" + name + "'");
}

void add_branch_keys(std::map<std::string, Setter>& m, const std::string& name) {
  const std::string p = "agent." + name + ".";
  m[p + "clip_epsilon"] = [name](Config& c, const YAML::Node& n, const std::string& k) {
    branch(c, name, k).clip_epsilon = as_double(n, k);
  };
  m[p + "discount"] = [name](Config& c, const YAML::Node& n, const std::string& k) {
    branch(c, name, k).discount = as_double(n, k);
  };
  m[p + "loss_weight"] = [name](Config& c, const YAML::Node& n, const std::string& k) {
    branch(c, name, k).loss_weight = as_double(n, k);
  };
  m[p + "init_sigma"] = [name](Config& c, const YAML::Node& n, const std::string& k) {
    branch(c, name, k).init_sigma = as_double(n, k);
  };
  m[p + "hidden_sizes"] = sizes([name](Config& c) -> std::vector<std::size_t>& {
    return branch(c, name, "agent." + name + ".hidden_sizes").hidden_sizes;
  });
}

const std::map<std::string, Setter>& registry() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
#define MPD_FIELD(key, kind, expr) m[key] = kind([](Config & c) -> auto& { return expr; })
    // plant
    MPD_FIELD("plant.knife_gain", real, c.plant.knife_gain);
    MPD_FIELD("plant.shrink", real, c.plant.shrink);
    MPD_FIELD("plant.couple", real, c.plant.couple);
    MPD_FIELD("plant.alpha_w", real, c.plant.alpha_w);
    MPD_FIELD("plant.sigma_w", real, c.plant.sigma_w);
    MPD_FIELD("plant.gap_gain", real, c.plant.gap_gain);
    MPD_FIELD("plant.draw", real, c.plant.draw);
    MPD_FIELD("plant.skew", real, c.plant.skew);
    MPD_FIELD("plant.alpha_h", real, c.plant.alpha_h);
    MPD_FIELD("plant.sigma_h", real, c.plant.sigma_h);
    MPD_FIELD("plant.ref_gap", real, c.plant.ref_gap);
    MPD_FIELD("plant.knife_ref", real, c.plant.knife_ref);
    m["plant.knife_bounds"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      std::array<double, 2> v{};
      pair([&v](Config&) -> auto& { return v; })(c, n, k);
      c.plant.knife_bounds = {v[0], v[1]};
    };
    m["plant.gap_bounds"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      std::array<double, 2> v{};
      pair([&v](Config&) -> auto& { return v; })(c, n, k);
      c.plant.gap_bounds = {v[0], v[1]};
    };
    m["plant.aux_noise_scale"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      const double s = as_double(n, k);
      if (s < 0.0) throw std::invalid_argument(k + ": must be >= 0");
      for (auto& a : c.plant.aux) a.noise *= s;
    };
    // data
    MPD_FIELD("data.steps", count, c.data.steps);
    m["data.excitation"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      try {
        c.data.excitation.kind = plant::parse_excitation(as<std::string>(n, k, "a string"));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(k + ": " + e.what());
      }
    };
    MPD_FIELD("data.knife_walk_sigma", real, c.data.excitation.knife_walk_sigma);
    MPD_FIELD("data.gap_walk_sigma", real, c.data.excitation.gap_walk_sigma);
    MPD_FIELD("data.jump_probability", real, c.data.excitation.jump_probability);
    MPD_FIELD("data.gap_split_sigma", real, c.data.excitation.gap_split_sigma);
    MPD_FIELD("data.train_fraction", real, c.data.split.train);
    MPD_FIELD("data.validation_fraction", real, c.data.split.validation);
    // forecaster
    MPD_FIELD("forecaster.window", count, c.forecaster.window);
    MPD_FIELD("forecaster.conv_kernel", count, c.forecaster.conv_kernel);
    MPD_FIELD("forecaster.conv_channels", count, c.forecaster.conv_channels);
    MPD_FIELD("forecaster.pool", count, c.forecaster.pool);
    MPD_FIELD("forecaster.lstm_hidden", count, c.forecaster.lstm_hidden);
    MPD_FIELD("forecaster.skip_hidden", count, c.forecaster.skip_hidden);
    MPD_FIELD("forecaster.skip_period", count, c.forecaster.skip_period);
    MPD_FIELD("forecaster.dropout", real, c.forecaster.dropout);
    MPD_FIELD("forecaster.fusion_hidden", count, c.forecaster.fusion_hidden);
    MPD_FIELD("forecaster.highway_window", count, c.forecaster.highway_window);
    MPD_FIELD("forecaster.lr", real, c.forecaster.lr);
    MPD_FIELD("forecaster.batch_size", count, c.forecaster.batch_size);
    MPD_FIELD("forecaster.epochs", count, c.forecaster.epochs);
    MPD_FIELD("forecaster.patience", count, c.forecaster.patience);
    MPD_FIELD("forecaster.max_batches_per_epoch", count, c.forecaster.max_batches_per_epoch);
    // env
    MPD_FIELD("env.width_target", real, c.episode.width_target);
    MPD_FIELD("env.thickness_target", real, c.episode.thickness_target);
    MPD_FIELD("env.width_tolerance", real, c.episode.width_tolerance);
    MPD_FIELD("env.thickness_tolerance", real, c.episode.thickness_tolerance);
    MPD_FIELD("env.max_steps", count, c.episode.max_steps);
    MPD_FIELD("env.knife_scale", real, c.episode.knife_scale);
    MPD_FIELD("env.gap_scale", real, c.episode.gap_scale);
    MPD_FIELD("env.history", count, c.episode.history);
    MPD_FIELD("env.init_knife_offset", real, c.episode.init_knife_offset);
    MPD_FIELD("env.init_gap_offset", real, c.episode.init_gap_offset);
    MPD_FIELD("env.init_gap_split", real, c.episode.init_gap_split);
    MPD_FIELD("env.min_width_error", real, c.episode.min_width_error);
    MPD_FIELD("env.min_thickness_error", real, c.episode.min_thickness_error);
    // reward
    MPD_FIELD("reward.error_coef", real, c.reward.error_coef);
    MPD_FIELD("reward.progress_coef", real, c.reward.progress_coef);
    MPD_FIELD("reward.action_coef", real, c.reward.action_coef);
    MPD_FIELD("reward.steady_coef", real, c.reward.steady_coef);
    MPD_FIELD("reward.steady_threshold", real, c.reward.steady_threshold);
    MPD_FIELD("reward.gate_steady", flag, c.reward.gate_steady);
    MPD_FIELD("reward.weights", pair, c.reward.weights);
    m["reward.total_clip"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      std::array<double, 2> v{};
      pair([&v](Config&) -> auto& { return v; })(c, n, k);
      c.reward.clip_lo = v[0];
      c.reward.clip_hi = v[1];
    };
    MPD_FIELD("reward.use_progress", flag, c.reward.use_progress);
    MPD_FIELD("reward.use_action", flag, c.reward.use_action);
    MPD_FIELD("reward.use_steady", flag, c.reward.use_steady);
    // agent
    MPD_FIELD("agent.lr", real, c.agent.ppo.lr);
    MPD_FIELD("agent.epochs", count, c.agent.ppo.epochs);
    MPD_FIELD("agent.minibatch", count, c.agent.ppo.minibatch);
    MPD_FIELD("agent.lambda", real, c.agent.ppo.lambda);
    MPD_FIELD("agent.value_coef", real, c.agent.ppo.value_coef);
    MPD_FIELD("agent.entropy_coef", real, c.agent.ppo.entropy_coef);
    MPD_FIELD("agent.max_grad_norm", real, c.agent.ppo.max_grad_norm);
    MPD_FIELD("agent.adv_eps", real, c.agent.ppo.adv_eps);
    MPD_FIELD("agent.standardize_advantages", flag, c.agent.ppo.standardize_advantages);
    MPD_FIELD("agent.standardize_returns", flag, c.agent.ppo.standardize_returns);
    MPD_FIELD("agent.episodes_per_update", count, c.agent.ppo.episodes_per_update);
    MPD_FIELD("agent.bootstrap_episode_end", flag, c.agent.ppo.bootstrap_episode_end);
    MPD_FIELD("agent.anneal_lr", flag, c.agent.ppo.anneal_lr);
    MPD_FIELD("agent.target_kl", real, c.agent.ppo.target_kl);
    MPD_FIELD("agent.trunk_sizes", sizes, c.agent.policy.trunk_sizes);
    MPD_FIELD("agent.critic_trunk", sizes, c.agent.critic_trunk);
    MPD_FIELD("agent.shared_advantage", flag, c.agent.shared_advantage);
    MPD_FIELD("agent.state_scale", reals, c.agent.state_scale);
    add_branch_keys(m, "width");
    add_branch_keys(m, "thickness");
    // experiment
    MPD_FIELD("experiment.episodes", count, c.experiment.episodes);
    MPD_FIELD("experiment.eval_episodes", count, c.experiment.eval_episodes);
    MPD_FIELD("experiment.seeds", count, c.experiment.seeds);
    MPD_FIELD("experiment.seed_base", count, c.experiment.seed_base);
    m["experiment.targets"] = [](Config& c, const YAML::Node& n, const std::string& k) {
      if (!n.IsSequence()) throw std::invalid_argument(k + ": expected a list of [width, thickness] pairs");
      std::vector<std::array<double, 2>> v;
      for (const auto& e : n) {
        std::array<double, 2> t{};
        pair([&t](Config&) -> auto& { return t; })(c, e, k);
        v.push_back(t);
      }
      c.experiment.targets = v;
    };
    MPD_FIELD("experiment.steps", sizes, c.experiment.steps);
    MPD_FIELD("experiment.grid_variants", strings, c.experiment.grid_variants);
    MPD_FIELD("experiment.ablation_variants", strings, c.experiment.ablation_variants);
    MPD_FIELD("experiment.ablation_target", pair, c.experiment.ablation_target);
    MPD_FIELD("experiment.ablation_steps", count, c.experiment.ablation_steps);
    MPD_FIELD("experiment.forecaster_seed", count, c.experiment.forecaster_seed);
    MPD_FIELD("experiment.environment", text, c.experiment.environment);
#undef MPD_FIELD
    return m;
  }();
  return table;
}

void flatten(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, YAML::Node>>& out) {
  for (const auto& kv : node) {
    const auto key = prefix.empty() ? kv.first.as<std::string>() : prefix + "." + kv.first.as<std::string>();
    if (kv.second.IsMap()) {
      flatten(kv.second, key, out);
    } else if (kv.second.IsNull()) {
      if (registry().count(key)) throw std::invalid_argument(key + ": missing value");
      // An empty section header is allowed.
      bool section = false;
      for (const auto& [k, _] : registry())
        if (k.rfind(key + ".", 0) == 0) section = true;
      if (!section) throw std::invalid_argument("unknown configuration key '" + key + "'");
    } else {
      out.emplace_back(key, kv.second);
    }
  }
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  auto str = s.str();
  if (str.find('.') == std::string::npos && str.find('e') == std::string::npos) str += ".0";
  return str;
}

}  // namespace

std::string Scenario::name() const {
  std::ostringstream s;
  s << "w" << format_number(width) << "_h" << format_number(thickness) << "_n" << steps;
  return s.str();
}

Scenario Scenario::parse(const std::string& text) {
  static const std::regex named(R"(w([0-9.]+)_h([0-9.]+)_n([0-9]+))");
  static const std::regex slashed(R"(([0-9.]+)/([0-9.]+)/([0-9]+))");
  std::smatch m;
  if (std::regex_match(text, m, named) || std::regex_match(text, m, slashed)) {
    Scenario s;
    s.width = std::stod(m[1]);
    s.thickness = std::stod(m[2]);
    s.steps = std::stoul(m[3]);
    if (s.steps == 0) throw std::invalid_argument("scenario '" + text + "': steps must be >= 1");
    return s;
  }
  throw std::invalid_argument("scenario '" + text + "': expected WIDTH/THICKNESS/STEPS or wW_hH_nN");
}

std::vector<Scenario> ExperimentConfig::grid_scenarios() const {
  std::vector<Scenario> out;
  for (auto n : steps)
    for (const auto& t : targets) out.push_back({t[0], t[1], n});
  return out;
}

Scenario ExperimentConfig::ablation_scenario() const { return {ablation_target[0], ablation_target[1], ablation_steps}; }

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seeds; ++i) out.push_back(seed_base + i);
  return out;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("experiment." + field + " " + why);
  };
  if (episodes < 1) fail("episodes", "must be >= 1");
  if (eval_episodes < 1) fail("eval_episodes", "must be >= 1");
  if (seeds < 1) fail("seeds", "must be >= 1");
  if (targets.empty()) fail("targets", "must not be empty");
  if (steps.empty()) fail("steps", "must not be empty");
  for (auto s : steps)
    if (s < 1) fail("steps", "entries must be >= 1");
  if (ablation_steps < 1) fail("ablation_steps", "must be >= 1");
  const auto known = ppo::variant_names();
  for (const auto* list : {&grid_variants, &ablation_variants})
    for (const auto& v : *list)
      if (std::find(known.begin(), known.end(), v) == known.end()) fail("variants", "contains unknown '" + v + "'");
  if (environment != "surrogate" && environment != "plant") fail("environment", "must be 'surrogate' or 'plant'");
}

void Config::validate() const {
  plant.validate();
  if (data.steps < 1) throw std::invalid_argument("data.steps must be >= 1");
  if (!(data.split.train > 0.0 && data.split.validation > 0.0 && data.split.train + data.split.validation < 1.0)) {
    throw std::invalid_argument("data.train_fraction / data.validation_fraction must be > 0 and sum below 1");
  }
  if (!(data.excitation.jump_probability >= 0.0 && data.excitation.jump_probability <= 1.0)) {
    throw std::invalid_argument("data.jump_probability must lie in [0, 1]");
  }
  forecaster.validate();
  episode.validate();
  reward.validate();
  agent.validate();
  experiment.validate();
  if (agent.policy.state_dim != env::state_dim(episode.history)) {
    throw std::invalid_argument("env.history gives a " + std::to_string(env::state_dim(episode.history)) +
                                "-dim state but the agent expects " + std::to_string(agent.policy.state_dim));
  }
}

Config parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("configuration is not valid YAML: ") + e.what());
  }
  Config cfg;
  if (root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  if (!root.IsMap()) throw std::invalid_argument("configuration root must be a mapping of sections");
  std::vector<std::pair<std::string, YAML::Node>> leaves;
  flatten(root, "", leaves);
  const auto& table = registry();
  for (const auto& [key, node] : leaves) {
    const auto it = table.find(key);
    if (it == table.end()) throw std::invalid_argument("unknown configuration key '" + key + "'");
    it->second(cfg, node, key);
  }
  // The history length fixes the state width.
  cfg.agent.policy.state_dim = env::state_dim(cfg.episode.history);
  if (!cfg.agent.state_scale.empty() && cfg.agent.state_scale.size() != cfg.agent.policy.state_dim) {
    throw std::invalid_argument("agent.state_scale: expected " + std::to_string(cfg.agent.policy.state_dim) +
                                " entries");
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read configuration file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : registry()) keys.push_back(k);
  return keys;
}

}  // namespace mpd::bench
