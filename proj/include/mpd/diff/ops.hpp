#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mpd/diff/tensor.hpp"

namespace mpd::diff {

// Elementwise ops. Binary ops accept equal shapes or a single-element
// operand on either side; anything else is a shape error.
Tensor add(Tape& tape, const Tensor& x, const Tensor& y);
Tensor sub(Tape& tape, const Tensor& x, const Tensor& y);
Tensor mul(Tape& tape, const Tensor& x, const Tensor& y);
/// Throws on any zero in the divisor instead of producing Inf.
Tensor div(Tape& tape, const Tensor& x, const Tensor& y);
/// Pointwise min/max; on ties the gradient goes to `x`.
Tensor minimum(Tape& tape, const Tensor& x, const Tensor& y);
Tensor maximum(Tape& tape, const Tensor& x, const Tensor& y);

Tensor exp(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor neg(Tape& tape, const Tensor& x);
Tensor square(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor add_scalar(Tape& tape, const Tensor& x, double offset);
/// Median of {lo, x, hi}; gradient passes where lo <= x <= hi.
Tensor clip(Tape& tape, const Tensor& x, double lo, double hi);

// Reductions.
Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
/// [rows x cols] -> [rows x 1]
Tensor sum_cols(Tape& tape, const Tensor& x);

// Linear algebra.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// x[rows x in] * w[in x out] + bias[out], bias broadcast over rows.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);
/// [n] -> [rows x n]
Tensor broadcast_rows(Tape& tape, const Tensor& row, std::size_t rows);

// Layout.
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);
/// x[batch x time x ch] -> [batch x ch] at time index `t`.
Tensor time_step(Tape& tape, const Tensor& x, std::size_t t);

// Sequence layers. Rank-2 inputs are [time x ch]; rank-3 are [batch x time x ch].
/// Valid convolution; kernels are [k x in_ch x out_ch]. Output time length is
/// floor((T - k) / stride) + 1.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernels, std::size_t stride = 1);
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias,
              std::size_t stride = 1);
/// Non-overlapping max over time; a trailing remainder shorter than the window
/// is dropped. Gradient goes to the first maximal element.
Tensor max_pool1d(Tape& tape, const Tensor& x, std::size_t window);

inline constexpr double kLayerNormEps = 1e-5;
/// Normalizes over the last axis, then applies per-feature gain and bias.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

/// Inverted dropout. In eval mode (training == false) this is the identity.
Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training, std::mt19937_64& rng);

}  // namespace mpd::diff
