#include "mpd/neuro/policy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mpd/diff/ops.hpp"

namespace mpd::neuro {

namespace {

constexpr double kHiddenGain = 1.4142135623730951;  // sqrt(2)
constexpr double kPolicyOutputGain = 0.01;
constexpr double kValueOutputGain = 1.0;

void check_state(const diff::Tensor& states, std::size_t dim, const char* who) {
  if (states.rank() != 2 || states.dim(1) != dim) {
    throw std::invalid_argument(std::string(who) + ": expected states of shape [batch x " + std::to_string(dim) +
                                "], got " + diff::shape_str(states.shape()));
  }
}

diff::Tensor state_row(std::span<const double> state, std::size_t dim, const char* who) {
  if (state.size() != dim) {
    throw std::invalid_argument(std::string(who) + ": state has " + std::to_string(state.size()) +
                                " entries, expected " + std::to_string(dim));
  }
  return diff::Tensor::matrix(1, dim, {state.begin(), state.end()});
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

}  // namespace

void BranchSpec::validate() const {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw std::invalid_argument("branch '" + name + "': " + field + " " + why);
  };
  if (name.empty()) throw std::invalid_argument("branch name must not be empty");
  if (action_dims < 1) fail("action_dims", "must be >= 1");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon", "must lie in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0)) fail("discount", "must lie in (0, 1]");
  if (!(loss_weight >= 0.0)) fail("loss_weight", "must be >= 0");
  if (!(init_sigma > 0.0)) fail("init_sigma", "must be > 0");
  for (auto h : hidden_sizes)
    if (h == 0) fail("hidden_sizes", "entries must be >= 1");
}

void validate_branches(std::span<const BranchSpec> branches) {
  if (branches.empty()) throw std::invalid_argument("at least one policy branch is required");
  double total = 0.0;
  for (const auto& b : branches) {
    b.validate();
    total += b.loss_weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("branch loss weights must not all be zero");
}

std::vector<BranchSpec> default_branches() {
  BranchSpec width;
  width.name = "width";
  width.action_dims = 1;
  width.clip_epsilon = 0.2;
  width.init_sigma = 0.5;
  BranchSpec thickness;
  thickness.name = "thickness";
  thickness.action_dims = 2;
  thickness.clip_epsilon = 0.1;
  thickness.init_sigma = 0.3;
  return {width, thickness};
}

PolicyNetwork::PolicyNetwork(PolicyConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  validate_branches(config_.branches);
  if (config_.state_dim == 0) throw std::invalid_argument("policy state_dim must be >= 1");
  trunk_ = TanhMlp::make(config_.state_dim, config_.trunk_sizes, kHiddenGain, rng);
  trunk_.register_in(params_, "trunk.");
  const auto trunk_out = trunk_.out(config_.state_dim);
  for (const auto& b : config_.branches) {
    auto hidden = TanhMlp::make(trunk_out, b.hidden_sizes, kHiddenGain, rng);
    auto out = Dense::orthogonal(hidden.out(trunk_out), b.action_dims, kPolicyOutputGain, rng);
    diff::Tensor log_std(diff::Shape{b.action_dims}, std::log(b.init_sigma));
    const auto prefix = "branch." + b.name + ".";
    hidden.register_in(params_, prefix + "hidden.");
    out.register_in(params_, prefix + "mean.");
    params_.add(prefix + "log_std", log_std);
    head_hidden_.push_back(std::move(hidden));
    head_out_.push_back(std::move(out));
    log_std_.push_back(log_std);
  }
}

PolicyOutput PolicyNetwork::forward(diff::Tape& tape, const diff::Tensor& states) const {
  check_state(states, config_.state_dim, "policy_forward");
  auto features = trunk_.forward(tape, states);
  PolicyOutput out;
  for (std::size_t i = 0; i < head_out_.size(); ++i) {
    out.means.push_back(head_out_[i].forward(tape, head_hidden_[i].forward(tape, features)));
    out.log_stds.push_back(log_std_[i]);
  }
  return out;
}

std::vector<BranchGaussian> PolicyNetwork::distributions(std::span<const double> state) const {
  diff::Tape tape(diff::Tape::Mode::inference);
  auto out = forward(tape, state_row(state, config_.state_dim, "policy_forward"));
  std::vector<BranchGaussian> dists;
  for (std::size_t i = 0; i < out.means.size(); ++i) {
    BranchGaussian g;
    auto m = out.means[i].values();
    g.mean.assign(m.begin(), m.end());
    for (double ls : out.log_stds[i].values()) g.std.push_back(std::exp(ls));
    dists.push_back(std::move(g));
  }
  return dists;
}

std::size_t PolicyNetwork::action_dims() const {
  std::size_t n = 0;
  for (const auto& b : config_.branches) n += b.action_dims;
  return n;
}

std::size_t PolicyNetwork::action_offset(std::size_t branch) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < branch; ++i) n += config_.branches.at(i).action_dims;
  return n;
}

std::vector<std::string> PolicyNetwork::branch_parameter_names(std::size_t branch) const {
  const auto prefix = "branch." + config_.branches.at(branch).name + ".";
  std::vector<std::string> names;
  for (const auto& e : params_.entries())
    if (e.name.rfind(prefix, 0) == 0) names.push_back(e.name);
  return names;
}

std::string PolicyNetwork::fingerprint() const {
  std::ostringstream out;
  out << "policy/s" << config_.state_dim << "/t" << join_sizes(config_.trunk_sizes);
  for (const auto& b : config_.branches) out << "/" << b.name << ":" << b.action_dims << ":h" << join_sizes(b.hidden_sizes);
  return out.str();
}

CriticNetwork::CriticNetwork(CriticConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  if (config_.heads == 0) throw std::invalid_argument("critic needs at least one value head");
  if (config_.state_dim == 0) throw std::invalid_argument("critic state_dim must be >= 1");
  trunk_ = TanhMlp::make(config_.state_dim, config_.trunk_sizes, kHiddenGain, rng);
  trunk_.register_in(params_, "trunk.");
  const auto trunk_out = trunk_.out(config_.state_dim);
  for (std::size_t i = 0; i < config_.heads; ++i) {
    heads_.push_back(Dense::orthogonal(trunk_out, 1, kValueOutputGain, rng));
    heads_.back().register_in(params_, "head." + std::to_string(i) + ".");
  }
}

diff::Tensor CriticNetwork::forward(diff::Tape& tape, const diff::Tensor& states) const {
  check_state(states, config_.state_dim, "critic_forward");
  auto features = trunk_.forward(tape, states);
  std::vector<diff::Tensor> cols;
  for (const auto& h : heads_) cols.push_back(h.forward(tape, features));
  return cols.size() == 1 ? cols.front() : diff::concat_cols(tape, cols);
}

std::vector<double> CriticNetwork::values(std::span<const double> state) const {
  diff::Tape tape(diff::Tape::Mode::inference);
  const auto out = forward(tape, state_row(state, config_.state_dim, "critic_forward"));
  auto v = out.values();
  return {v.begin(), v.end()};
}

std::string CriticNetwork::fingerprint() const {
  return "critic/s" + std::to_string(config_.state_dim) + "/t" + join_sizes(config_.trunk_sizes) + "/heads" +
         std::to_string(config_.heads);
}

}  // namespace mpd::neuro
