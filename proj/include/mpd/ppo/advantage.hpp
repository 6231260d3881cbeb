#pragma once

#include <span>
#include <vector>

namespace mpd::ppo {

/// R_t = r_t + gamma R_{t+1}, restarting after every done flag.
std::vector<double> discounted_returns(std::span<const double> rewards, std::span<const bool> dones, double gamma);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values: the value targets
};

/// Generalized advantage estimation over a flat sequence of transitions.
/// values[t] is V(s_t); V(s_{t+1}) is read from values[t+1] inside an
/// episode and is zero after a done flag. `last_value` bootstraps a final
/// transition that is not done.
GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                         double gamma, double lambda, double last_value = 0.0);

inline constexpr double kStandardizeEps = 1e-8;

/// (x - mean) / (population std + eps).
std::vector<double> standardize(std::span<const double> x, double eps = kStandardizeEps);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

}  // namespace mpd::ppo
