#include "mpd/diff/rnn.hpp"

#include <cmath>
#include <stdexcept>

#include "mpd/diff/ops.hpp"

namespace mpd::diff {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.mutable_values()) v = dist(rng);
  return t;
}

void check_cell_dims(const char* cell, const Tensor& x, const Tensor& h, std::size_t in, std::size_t hidden) {
  if (x.rank() != 2 || x.dim(1) != in || h.rank() != 2 || h.dim(1) != hidden || h.dim(0) != x.dim(0)) {
    throw std::invalid_argument(std::string(cell) + ": input " + shape_str(x.shape()) + " / state " +
                                shape_str(h.shape()) + " inconsistent with input_size " + std::to_string(in) +
                                ", hidden_size " + std::to_string(hidden));
  }
}

}  // namespace

LstmParams LstmParams::init(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w_input = uniform({input_size, 4 * hidden_size}, bound, rng);
  p.w_hidden = uniform({hidden_size, 4 * hidden_size}, bound, rng);
  p.bias = uniform({4 * hidden_size}, bound, rng);
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w_input = Tensor({input_size, 4 * hidden_size});
  p.w_hidden = Tensor({hidden_size, 4 * hidden_size});
  p.bias = Tensor({4 * hidden_size});
  return p;
}

void LstmParams::register_in(ParameterList& params, const std::string& prefix) const {
  params.add(prefix + "w_input", w_input);
  params.add(prefix + "w_hidden", w_hidden);
  params.add(prefix + "bias", bias);
}

LstmState lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& p) {
  check_cell_dims("lstm_cell", x, h_prev, p.input_size, p.hidden_size);
  if (c_prev.shape() != h_prev.shape()) {
    throw std::invalid_argument("lstm_cell: cell state " + shape_str(c_prev.shape()) + " differs from hidden " +
                                shape_str(h_prev.shape()));
  }
  const auto H = p.hidden_size;
  Tensor gates = add(tape, linear(tape, x, p.w_input, p.bias), matmul(tape, h_prev, p.w_hidden));
  Tensor i = sigmoid(tape, slice_cols(tape, gates, 0, H));
  Tensor f = sigmoid(tape, slice_cols(tape, gates, H, 2 * H));
  Tensor g = tanh(tape, slice_cols(tape, gates, 2 * H, 3 * H));
  Tensor o = sigmoid(tape, slice_cols(tape, gates, 3 * H, 4 * H));
  Tensor c = add(tape, mul(tape, f, c_prev), mul(tape, i, g));
  Tensor h = mul(tape, o, tanh(tape, c));
  return {h, c};
}

GruParams GruParams::init(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w_input = uniform({input_size, 3 * hidden_size}, bound, rng);
  p.w_hidden = uniform({hidden_size, 3 * hidden_size}, bound, rng);
  p.bias_input = uniform({3 * hidden_size}, bound, rng);
  p.bias_hidden = uniform({3 * hidden_size}, bound, rng);
  return p;
}

GruParams GruParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w_input = Tensor({input_size, 3 * hidden_size});
  p.w_hidden = Tensor({hidden_size, 3 * hidden_size});
  p.bias_input = Tensor({3 * hidden_size});
  p.bias_hidden = Tensor({3 * hidden_size});
  return p;
}

void GruParams::register_in(ParameterList& params, const std::string& prefix) const {
  params.add(prefix + "w_input", w_input);
  params.add(prefix + "w_hidden", w_hidden);
  params.add(prefix + "bias_input", bias_input);
  params.add(prefix + "bias_hidden", bias_hidden);
}

Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  check_cell_dims("gru_cell", x, h_prev, p.input_size, p.hidden_size);
  const auto H = p.hidden_size;
  Tensor gx = linear(tape, x, p.w_input, p.bias_input);
  Tensor gh = linear(tape, h_prev, p.w_hidden, p.bias_hidden);
  Tensor r = sigmoid(tape, add(tape, slice_cols(tape, gx, 0, H), slice_cols(tape, gh, 0, H)));
  Tensor z = sigmoid(tape, add(tape, slice_cols(tape, gx, H, 2 * H), slice_cols(tape, gh, H, 2 * H)));
  Tensor n = tanh(tape, add(tape, slice_cols(tape, gx, 2 * H, 3 * H), mul(tape, r, slice_cols(tape, gh, 2 * H, 3 * H))));
  // h' = n + z * (h - n)
  return add(tape, n, mul(tape, z, sub(tape, h_prev, n)));
}

}  // namespace mpd::diff
