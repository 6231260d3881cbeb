#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mpd/diff/params.hpp"
#include "mpd/diff/tensor.hpp"
#include "mpd/neuro/layers.hpp"

namespace mpd::neuro {

/// Configuration of one action pathway (one actuator group).
struct BranchSpec {
  std::string name;
  std::size_t action_dims = 1;
  double clip_epsilon = 0.2;
  double discount = 0.9;
  double loss_weight = 0.5;
  double init_sigma = 0.5;
  std::vector<std::size_t> hidden_sizes{32};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Checks each branch and that the loss weights do not all vanish.
void validate_branches(std::span<const BranchSpec> branches);

/// Width pathway (knife spacing, 1 dim) and thickness pathway (DS/OS roll
/// gaps, 2 dims) with their default clip ranges and exploration widths.
std::vector<BranchSpec> default_branches();

struct PolicyConfig {
  std::size_t state_dim = 17;
  std::vector<std::size_t> trunk_sizes{64, 64};
  std::vector<BranchSpec> branches = default_branches();
};

/// Per-branch diagonal Gaussian parameters for one state.
struct BranchGaussian {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Batched policy output; means[i] is [batch x dims_i], log_stds[i] is [dims_i].
struct PolicyOutput {
  std::vector<diff::Tensor> means;
  std::vector<diff::Tensor> log_stds;
};

/// Shared tanh trunk feeding N independent heads, each with its own
/// state-independent trainable log standard deviation.
class PolicyNetwork {
 public:
  PolicyNetwork(PolicyConfig config, std::mt19937_64& rng);

  PolicyOutput forward(diff::Tape& tape, const diff::Tensor& states) const;
  /// Single-state evaluation without gradient tracking.
  std::vector<BranchGaussian> distributions(std::span<const double> state) const;

  const PolicyConfig& config() const { return config_; }
  std::size_t branch_count() const { return config_.branches.size(); }
  std::size_t action_dims() const;
  /// Offset of branch i in the concatenated action vector.
  std::size_t action_offset(std::size_t branch) const;

  diff::ParameterList& parameters() { return params_; }
  const diff::ParameterList& parameters() const { return params_; }
  /// Names of the parameters owned exclusively by branch i (head and log-std).
  std::vector<std::string> branch_parameter_names(std::size_t branch) const;
  std::string fingerprint() const;

 private:
  PolicyConfig config_;
  TanhMlp trunk_;
  std::vector<TanhMlp> head_hidden_;
  std::vector<Dense> head_out_;
  std::vector<diff::Tensor> log_std_;
  diff::ParameterList params_;
};

struct CriticConfig {
  std::size_t state_dim = 17;
  std::vector<std::size_t> trunk_sizes{64, 64};
  std::size_t heads = 2;
};

/// Shared tanh trunk with one linear scalar value head per branch.
class CriticNetwork {
 public:
  CriticNetwork(CriticConfig config, std::mt19937_64& rng);

  /// [batch x heads]
  diff::Tensor forward(diff::Tape& tape, const diff::Tensor& states) const;
  std::vector<double> values(std::span<const double> state) const;

  const CriticConfig& config() const { return config_; }
  diff::ParameterList& parameters() { return params_; }
  const diff::ParameterList& parameters() const { return params_; }
  std::string fingerprint() const;

 private:
  CriticConfig config_;
  TanhMlp trunk_;
  std::vector<Dense> heads_;
  diff::ParameterList params_;
};

}  // namespace mpd::neuro
