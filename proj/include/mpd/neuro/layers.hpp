#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mpd/diff/params.hpp"
#include "mpd/diff/tensor.hpp"

namespace mpd::neuro {

/// Fully connected layer y = x W + b.
struct Dense {
  diff::Tensor weight;  // [in x out]
  diff::Tensor bias;    // [out]

  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }

  /// Orthogonal initialization (QR of a Gaussian matrix) times `gain`, zero bias.
  static Dense orthogonal(std::size_t in, std::size_t out, double gain, std::mt19937_64& rng);
  static Dense zeros(std::size_t in, std::size_t out);

  void register_in(diff::ParameterList& params, const std::string& prefix) const;
  diff::Tensor forward(diff::Tape& tape, const diff::Tensor& x) const;
};

/// Stack of tanh-activated dense layers.
struct TanhMlp {
  std::vector<Dense> layers;

  static TanhMlp make(std::size_t in, const std::vector<std::size_t>& sizes, double gain, std::mt19937_64& rng);
  std::size_t out(std::size_t in) const { return layers.empty() ? in : layers.back().out(); }
  void register_in(diff::ParameterList& params, const std::string& prefix) const;
  diff::Tensor forward(diff::Tape& tape, const diff::Tensor& x) const;
};

}  // namespace mpd::neuro
