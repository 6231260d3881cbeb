#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "json.hpp"
#include "mpd/diff/params.hpp"
#include "mpd/diff/rnn.hpp"
#include "mpd/diff/tensor.hpp"

namespace mpd::forecast {

struct ForecasterConfig {
  std::size_t window = 32;
  std::size_t conv_kernel = 6;
  std::size_t conv_channels = 32;
  std::size_t pool = 2;
  std::size_t lstm_hidden = 64;
  std::size_t skip_hidden = 16;
  std::size_t skip_period = 4;  // in pooled steps
  double dropout = 0.1;
  std::size_t fusion_hidden = 32;
  /// Rows of raw input feeding the linear autoregressive bypass; 0 disables it.
  std::size_t highway_window = 8;

  double lr = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t epochs = 100;
  /// Early stop after this many epochs without validation improvement; 0 = off.
  std::size_t patience = 0;
  /// Cap on minibatches per epoch (a fresh random subset each epoch); 0 = all.
  std::size_t max_batches_per_epoch = 0;

  std::size_t conv_length() const { return window - conv_kernel + 1; }
  std::size_t pooled_length() const { return conv_length() / pool; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  static ForecasterConfig from_json(const nlohmann::json& j);
};

/// Intermediate activations of one forward pass.
struct LstNetTrace {
  diff::Tensor pooled;   // [B x L x C], after layer norm
  diff::Tensor lstm;     // [B x H]
  diff::Tensor skip;     // [B x p*Hs]
  diff::Tensor output;   // [B x 1], normalized target space
};

/// conv -> relu -> max-pool -> layer norm -> (LSTM || skip-GRU) -> concat ->
/// dropout -> dense(relu) -> linear, plus an optional linear highway over the
/// last raw input rows.
class LstNet {
 public:
  LstNet(const ForecasterConfig& cfg, std::size_t features, std::mt19937_64& rng);

  /// x: [B x T x F] normalized. `rng` is only used when training with dropout.
  diff::Tensor forward(diff::Tape& tape, const diff::Tensor& x, bool training, std::mt19937_64* rng) const;
  LstNetTrace trace(diff::Tape& tape, const diff::Tensor& x, bool training, std::mt19937_64* rng) const;

  std::size_t features() const { return features_; }
  const ForecasterConfig& config() const { return cfg_; }
  diff::ParameterList& parameters() { return params_; }
  const diff::ParameterList& parameters() const { return params_; }
  const diff::GruParams& skip_gru() const { return gru_; }
  std::string fingerprint() const;

 private:
  ForecasterConfig cfg_;
  std::size_t features_;
  diff::Tensor conv_w_, conv_b_, ln_gain_, ln_bias_;
  diff::LstmParams lstm_;
  diff::GruParams gru_;
  diff::Tensor fusion_w_, fusion_b_, out_w_, out_b_, highway_w_;
  diff::ParameterList params_;
};

/// Runs one GRU over each of the `period` phase-offset subsequences of seq
/// [B x L x C] (phase j takes steps L-1-j, L-1-j-period, ... in time order)
/// and concatenates the final hidden states, most recent phase first.
diff::Tensor skip_gru(diff::Tape& tape, const diff::Tensor& seq, const diff::GruParams& p, std::size_t period);

}  // namespace mpd::forecast
