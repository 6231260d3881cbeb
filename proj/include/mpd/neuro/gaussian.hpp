#pragma once

#include <random>
#include <span>
#include <vector>

#include "mpd/diff/tensor.hpp"
#include "mpd/neuro/policy.hpp"

namespace mpd::neuro {

inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;      // 0.5 ln(2 pi)
inline constexpr double kHalfLogTwoPiE = 1.41893853320467274178;     // 0.5 ln(2 pi e)

/// Draws a ~ N(mu, diag(sigma^2)) per branch and concatenates the branches
/// in declaration order.
std::vector<double> sample_action(std::span<const BranchGaussian> dists, std::mt19937_64& rng);
/// Concatenated branch means (the greedy action).
std::vector<double> mean_action(std::span<const BranchGaussian> dists);

/// Per-branch log-density of the concatenated action. Throws on sigma <= 0
/// or a dimension mismatch.
std::vector<double> log_prob(std::span<const BranchGaussian> dists, std::span<const double> action);
double log_prob(std::span<const double> mean, std::span<const double> std, std::span<const double> action);

/// Sum over dimensions of 0.5 ln(2 pi e sigma^2). Throws on sigma <= 0.
double entropy(std::span<const double> std);
std::vector<double> entropy(std::span<const BranchGaussian> dists);

/// Differentiable log-density: mean [batch x d], log_std [d], actions
/// [batch x d] -> [batch x 1].
diff::Tensor gaussian_log_prob(diff::Tape& tape, const diff::Tensor& mean, const diff::Tensor& log_std,
                               const diff::Tensor& actions);
/// Differentiable entropy of a diagonal Gaussian with the given log-std.
diff::Tensor gaussian_entropy(diff::Tape& tape, const diff::Tensor& log_std);

}  // namespace mpd::neuro
