#include "mpd/neuro/gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mpd/diff/ops.hpp"

namespace mpd::neuro {

std::vector<double> sample_action(std::span<const BranchGaussian> dists, std::mt19937_64& rng) {
  std::vector<double> action;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& d : dists)
    for (std::size_t i = 0; i < d.mean.size(); ++i) action.push_back(d.mean[i] + d.std[i] * normal(rng));
  return action;
}

std::vector<double> mean_action(std::span<const BranchGaussian> dists) {
  std::vector<double> action;
  for (const auto& d : dists) action.insert(action.end(), d.mean.begin(), d.mean.end());
  return action;
}

double log_prob(std::span<const double> mean, std::span<const double> std, std::span<const double> action) {
  if (mean.size() != std.size() || mean.size() != action.size()) {
    throw std::invalid_argument("log_prob: mean/std/action sizes " + std::to_string(mean.size()) + "/" +
                                std::to_string(std.size()) + "/" + std::to_string(action.size()) + " differ");
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(std[i] > 0.0)) throw std::invalid_argument("log_prob: standard deviation must be > 0");
    const double z = (action[i] - mean[i]) / std[i];
    lp += -0.5 * z * z - std::log(std[i]) - kHalfLogTwoPi;
  }
  return lp;
}

std::vector<double> log_prob(std::span<const BranchGaussian> dists, std::span<const double> action) {
  std::size_t dims = 0;
  for (const auto& d : dists) dims += d.mean.size();
  if (dims != action.size()) {
    throw std::invalid_argument("log_prob: action has " + std::to_string(action.size()) + " entries, branches expect " +
                                std::to_string(dims));
  }
  std::vector<double> out;
  std::size_t offset = 0;
  for (const auto& d : dists) {
    out.push_back(log_prob(d.mean, d.std, action.subspan(offset, d.mean.size())));
    offset += d.mean.size();
  }
  return out;
}

double entropy(std::span<const double> std) {
  double h = 0.0;
  for (double s : std) {
    if (!(s > 0.0)) throw std::invalid_argument("entropy: standard deviation must be > 0");
    h += kHalfLogTwoPiE + std::log(s);
  }
  return h;
}

std::vector<double> entropy(std::span<const BranchGaussian> dists) {
  std::vector<double> out;
  for (const auto& d : dists) out.push_back(entropy(d.std));
  return out;
}

diff::Tensor gaussian_log_prob(diff::Tape& tape, const diff::Tensor& mean, const diff::Tensor& log_std,
                               const diff::Tensor& actions) {
  if (mean.shape() != actions.shape() || mean.rank() != 2 || log_std.numel() != mean.dim(1)) {
    throw std::invalid_argument("gaussian_log_prob: mean " + diff::shape_str(mean.shape()) + ", log_std " +
                                diff::shape_str(log_std.shape()) + ", actions " + diff::shape_str(actions.shape()) +
                                " are inconsistent");
  }
  const auto rows = mean.dim(0);
  auto ls = diff::broadcast_rows(tape, log_std, rows);
  auto z = diff::mul(tape, diff::sub(tape, actions, mean), diff::exp(tape, diff::neg(tape, ls)));
  auto per_dim = diff::add_scalar(tape, diff::sub(tape, diff::scale(tape, diff::square(tape, z), -0.5), ls),
                                  -kHalfLogTwoPi);
  return diff::sum_cols(tape, per_dim);
}

diff::Tensor gaussian_entropy(diff::Tape& tape, const diff::Tensor& log_std) {
  return diff::add_scalar(tape, diff::sum(tape, log_std), kHalfLogTwoPiE * static_cast<double>(log_std.numel()));
}

}  // namespace mpd::neuro
