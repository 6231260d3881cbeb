#include "mpd/diff/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mpd::diff {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState state;
  for (const auto& p : params) {
    state.slots.push_back(AdamSlot{std::vector<double>(p.numel(), 0.0), std::vector<double>(p.numel(), 0.0), 0});
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options) {
  if (state.slots.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " parameters but " +
                                std::to_string(state.slots.size()) + " state slots");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& slot = state.slots[k];
    if (slot.m.size() != p.numel() || slot.v.size() != p.numel()) {
      throw std::invalid_argument("adam_step: state slot " + std::to_string(k) + " does not match parameter shape " +
                                  shape_str(p.shape()));
    }
    ++slot.step;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(slot.step));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(slot.step));
    auto values = p.mutable_values();
    auto g = p.grad();
    const bool has_grad = !g.empty();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      slot.m[i] = options.beta1 * slot.m[i] + (1.0 - options.beta1) * gi;
      slot.v[i] = options.beta2 * slot.v[i] + (1.0 - options.beta2) * gi * gi;
      const double m_hat = slot.m[i] / c1;
      const double v_hat = slot.v[i] / c2;
      values[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
    p.drop_grad();
  }
}

double grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (auto& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

Adam::Adam(const ParameterList& params, AdamOptions options)
    : params_(params.tensors()), options_(options), state_(AdamState::for_params(params_)) {}

void Adam::step() { adam_step(params_, state_, options_); }

void Adam::zero_grad() {
  for (auto& p : params_) p.drop_grad();
}

double Adam::clip_grad_norm(double max_norm) { return diff::clip_grad_norm(params_, max_norm); }

}  // namespace mpd::diff
