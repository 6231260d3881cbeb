#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "mpd/diff/params.hpp"
#include "mpd/diff/tensor.hpp"

namespace mpd::diff {

/// LSTM weights with gates packed column-wise in the order input, forget,
/// candidate, output.
struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_input;   // [in x 4H]
  Tensor w_hidden;  // [H x 4H]
  Tensor bias;      // [4H]

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization.
  static LstmParams init(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng);
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  void register_in(ParameterList& params, const std::string& prefix) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// x: [batch x in], h_prev/c_prev: [batch x H].
LstmState lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                    const LstmParams& p);

/// GRU weights packed in the order reset, update, candidate. Hidden-side
/// candidate bias sits inside the reset product:
///   n = tanh(x W_n + b_in + r * (h U_n + b_hn)),  h' = (1 - z) * n + z * h
struct GruParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_input;      // [in x 3H]
  Tensor w_hidden;     // [H x 3H]
  Tensor bias_input;   // [3H]
  Tensor bias_hidden;  // [3H]

  static GruParams init(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng);
  static GruParams zeros(std::size_t input_size, std::size_t hidden_size);
  void register_in(ParameterList& params, const std::string& prefix) const;
};

Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruParams& p);

}  // namespace mpd::diff
