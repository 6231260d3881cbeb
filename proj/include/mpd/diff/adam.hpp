#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mpd/diff/params.hpp"
#include "mpd/diff/tensor.hpp"

namespace mpd::diff {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One slot per parameter tensor, in the same order as the parameter list.
struct AdamState {
  std::vector<AdamSlot> slots;

  static AdamState for_params(std::span<const Tensor> params);
};

/// Bias-corrected Adam update. A parameter without an accumulated gradient is
/// treated as having gradient zero. Gradients are cleared afterwards.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options);

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);
double grad_norm(std::span<const Tensor> params);

/// Convenience owner of a parameter list plus its Adam state.
class Adam {
 public:
  Adam(const ParameterList& params, AdamOptions options);
  void step();
  void zero_grad();
  double clip_grad_norm(double max_norm);
  AdamOptions& options() { return options_; }
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  AdamState state_;
};

}  // namespace mpd::diff
