#include "mpd/forecast/lstnet.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mpd/diff/ops.hpp"

namespace mpd::forecast {

namespace {

diff::Tensor uniform(diff::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  diff::Tensor t(std::move(shape));
  for (auto& v : t.mutable_values()) v = u(rng);
  return t;
}

void require(bool ok, const char* field, const char* why) {
  if (!ok) throw std::invalid_argument(std::string("forecaster.") + field + " " + why);
}

}  // namespace

void ForecasterConfig::validate() const {
  require(conv_kernel >= 1, "conv_kernel", "must be >= 1");
  require(window >= conv_kernel, "window", "must be >= conv_kernel");
  require(conv_channels >= 1, "conv_channels", "must be >= 1");
  require(pool >= 1, "pool", "must be >= 1");
  require(pooled_length() >= 1, "pool", "must not exceed the post-convolution length");
  require(lstm_hidden >= 1, "lstm_hidden", "must be >= 1");
  require(skip_hidden >= 1, "skip_hidden", "must be >= 1");
  require(skip_period >= 1, "skip_period", "must be >= 1");
  require(skip_period < pooled_length() || skip_period == 1, "skip_period",
          "must be smaller than the pooled sequence length");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
  require(fusion_hidden >= 1, "fusion_hidden", "must be >= 1");
  require(highway_window <= window, "highway_window", "must not exceed window");
  require(lr > 0.0, "lr", "must be > 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(epochs >= 1, "epochs", "must be >= 1");
}

nlohmann::json ForecasterConfig::to_json() const {
  return {{"window", window},
          {"conv_kernel", conv_kernel},
          {"conv_channels", conv_channels},
          {"pool", pool},
          {"lstm_hidden", lstm_hidden},
          {"skip_hidden", skip_hidden},
          {"skip_period", skip_period},
          {"dropout", dropout},
          {"fusion_hidden", fusion_hidden},
          {"highway_window", highway_window},
          {"lr", lr},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"patience", patience},
          {"max_batches_per_epoch", max_batches_per_epoch}};
}

ForecasterConfig ForecasterConfig::from_json(const nlohmann::json& j) {
  ForecasterConfig c;
  c.window = j.at("window");
  c.conv_kernel = j.at("conv_kernel");
  c.conv_channels = j.at("conv_channels");
  c.pool = j.at("pool");
  c.lstm_hidden = j.at("lstm_hidden");
  c.skip_hidden = j.at("skip_hidden");
  c.skip_period = j.at("skip_period");
  c.dropout = j.at("dropout");
  c.fusion_hidden = j.at("fusion_hidden");
  c.highway_window = j.at("highway_window");
  c.lr = j.at("lr");
  c.batch_size = j.at("batch_size");
  c.epochs = j.at("epochs");
  c.patience = j.at("patience");
  c.max_batches_per_epoch = j.at("max_batches_per_epoch");
  c.validate();
  return c;
}

LstNet::LstNet(const ForecasterConfig& cfg, std::size_t features, std::mt19937_64& rng)
    : cfg_(cfg), features_(features) {
  cfg_.validate();
  if (features == 0) throw std::invalid_argument("LstNet needs at least one input feature");
  const std::size_t k = cfg_.conv_kernel, C = cfg_.conv_channels;
  conv_w_ = uniform({k, features, C}, 1.0 / std::sqrt(static_cast<double>(k * features)), rng);
  conv_b_ = diff::Tensor({C}, 0.0);
  ln_gain_ = diff::Tensor({C}, 1.0);
  ln_bias_ = diff::Tensor({C}, 0.0);
  lstm_ = diff::LstmParams::init(C, cfg_.lstm_hidden, rng);
  gru_ = diff::GruParams::init(C, cfg_.skip_hidden, rng);
  const std::size_t cat = cfg_.lstm_hidden + cfg_.skip_period * cfg_.skip_hidden;
  fusion_w_ = uniform({cat, cfg_.fusion_hidden}, 1.0 / std::sqrt(static_cast<double>(cat)), rng);
  fusion_b_ = diff::Tensor({cfg_.fusion_hidden}, 0.0);
  out_w_ = uniform({cfg_.fusion_hidden, 1}, 1.0 / std::sqrt(static_cast<double>(cfg_.fusion_hidden)), rng);
  out_b_ = diff::Tensor({1}, 0.0);

  params_.add("conv.weight", conv_w_);
  params_.add("conv.bias", conv_b_);
  params_.add("norm.gain", ln_gain_);
  params_.add("norm.bias", ln_bias_);
  lstm_.register_in(params_, "lstm.");
  gru_.register_in(params_, "skip_gru.");
  params_.add("fusion.weight", fusion_w_);
  params_.add("fusion.bias", fusion_b_);
  params_.add("output.weight", out_w_);
  params_.add("output.bias", out_b_);
  if (cfg_.highway_window > 0) {
    highway_w_ = diff::Tensor({cfg_.highway_window * features, 1}, 0.0);
    params_.add("highway.weight", highway_w_);
  }
}

diff::Tensor skip_gru(diff::Tape& tape, const diff::Tensor& seq, const diff::GruParams& p, std::size_t period) {
  if (seq.rank() != 3) throw std::invalid_argument("skip_gru: expected [batch x time x channels]");
  if (period == 0) throw std::invalid_argument("skip_gru: period must be >= 1");
  const std::size_t B = seq.dim(0), L = seq.dim(1);
  std::vector<diff::Tensor> finals;
  for (std::size_t phase = 0; phase < period; ++phase) {
    diff::Tensor h({B, p.hidden_size}, 0.0);
    if (phase < L) {
      // Earliest step of this phase, then forward in strides of `period`.
      const std::size_t last = L - 1 - phase;
      for (std::size_t t = last % period; t <= last; t += period) h = diff::gru_cell(tape, diff::time_step(tape, seq, t), h, p);
    }
    finals.push_back(h);
  }
  return finals.size() == 1 ? finals.front() : diff::concat_cols(tape, finals);
}

LstNetTrace LstNet::trace(diff::Tape& tape, const diff::Tensor& x, bool training, std::mt19937_64* rng) const {
  if (x.rank() != 3 || x.dim(1) != cfg_.window || x.dim(2) != features_) {
    throw std::invalid_argument("lstnet_forward: expected input [batch x " + std::to_string(cfg_.window) + " x " +
                                std::to_string(features_) + "], got " + diff::shape_str(x.shape()));
  }
  if (training && cfg_.dropout > 0.0 && rng == nullptr) {
    throw std::invalid_argument("lstnet_forward: training with dropout needs a generator");
  }
  const std::size_t B = x.dim(0);
  LstNetTrace tr;
  auto conv = diff::relu(tape, diff::conv1d(tape, x, conv_w_, conv_b_));
  auto pooled = diff::max_pool1d(tape, conv, cfg_.pool);
  tr.pooled = diff::layer_norm(tape, pooled, ln_gain_, ln_bias_);

  const std::size_t L = tr.pooled.dim(1);
  diff::LstmState st{diff::Tensor({B, cfg_.lstm_hidden}, 0.0), diff::Tensor({B, cfg_.lstm_hidden}, 0.0)};
  for (std::size_t t = 0; t < L; ++t) st = diff::lstm_cell(tape, diff::time_step(tape, tr.pooled, t), st.h, st.c, lstm_);
  tr.lstm = st.h;
  tr.skip = forecast::skip_gru(tape, tr.pooled, gru_, cfg_.skip_period);

  auto cat = diff::concat_cols(tape, {tr.lstm, tr.skip});
  std::mt19937_64 unused(0);
  auto dropped = diff::dropout(tape, cat, cfg_.dropout, training, rng ? *rng : unused);
  auto fused = diff::relu(tape, diff::linear(tape, dropped, fusion_w_, fusion_b_));
  tr.output = diff::linear(tape, fused, out_w_, out_b_);

  if (cfg_.highway_window > 0) {
    const std::size_t hw = cfg_.highway_window, T = cfg_.window, F = features_;
    std::vector<double> tail(B * hw * F);
    auto xv = x.values();
    for (std::size_t b = 0; b < B; ++b) {
      const auto src = xv.begin() + static_cast<std::ptrdiff_t>((b * T + (T - hw)) * F);
      std::copy(src, src + static_cast<std::ptrdiff_t>(hw * F), tail.begin() + static_cast<std::ptrdiff_t>(b * hw * F));
    }
    diff::Tensor recent({B, hw * F}, std::move(tail));
    tr.output = diff::add(tape, tr.output, diff::matmul(tape, recent, highway_w_));
  }
  return tr;
}

diff::Tensor LstNet::forward(diff::Tape& tape, const diff::Tensor& x, bool training, std::mt19937_64* rng) const {
  return trace(tape, x, training, rng).output;
}

std::string LstNet::fingerprint() const {
  std::ostringstream out;
  out << "lstnet/f" << features_ << "/T" << cfg_.window << "/k" << cfg_.conv_kernel << "/c" << cfg_.conv_channels
      << "/pool" << cfg_.pool << "/lstm" << cfg_.lstm_hidden << "/skip" << cfg_.skip_hidden << "x" << cfg_.skip_period
      << "/fuse" << cfg_.fusion_hidden << "/hw" << cfg_.highway_window;
  return out.str();
}

}  // namespace mpd::forecast
