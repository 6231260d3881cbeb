#include "mpd/ppo/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mpd::ppo {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
}

}  // namespace

std::vector<double> discounted_returns(std::span<const double> rewards, std::span<const bool> dones, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("discounted_returns: empty reward sequence");
  if (rewards.size() != dones.size()) {
    throw std::invalid_argument("discounted_returns: " + std::to_string(rewards.size()) + " rewards but " +
                                std::to_string(dones.size()) + " done flags");
  }
  check_gamma(gamma);
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    if (dones[i]) running = 0.0;
    running = rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                         double gamma, double lambda, double last_value) {
  const std::size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("gae_advantages: empty reward sequence");
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("gae_advantages: length mismatch (rewards " + std::to_string(n) + ", values " +
                                std::to_string(values.size()) + ", dones " + std::to_string(dones.size()) + ")");
  }
  check_gamma(gamma);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("gae lambda must lie in [0, 1]");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? values[i + 1] : last_value;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

std::vector<double> standardize(std::span<const double> x, double eps) {
  if (x.empty()) return {};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((v - mean) / (sd + eps));
  return out;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

}  // namespace mpd::ppo
