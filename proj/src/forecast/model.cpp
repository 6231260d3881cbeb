#include "mpd/forecast/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mpd/diff/adam.hpp"
#include "mpd/diff/ops.hpp"
#include "mpd/neuro/checkpoint.hpp"

namespace mpd::forecast {

namespace {

constexpr std::size_t kEvalBatch = 512;

// Reciprocal condition estimate below which the damped normal equations are
// treated as singular.
constexpr double kMinRcond = 1e-15;

nlohmann::json spec_to_json(const FeatureSpec& s) {
  return {{"name", s.name}, {"target", s.target}, {"features", s.features}, {"tolerance", s.tolerance}};
}

FeatureSpec spec_from_json(const nlohmann::json& j) {
  return {j.at("name"), j.at("target"), j.at("features").get<std::vector<std::string>>(), j.at("tolerance")};
}

}  // namespace

ForecastMetrics evaluate(std::span<const double> predicted, std::span<const double> actual, double tolerance) {
  if (predicted.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (predicted.size() != actual.size()) throw std::invalid_argument("evaluate: prediction/target size mismatch");
  if (!(tolerance > 0.0)) throw std::invalid_argument("evaluate: tolerance must be > 0");
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = std::abs(predicted[i] - actual[i]);
    abs_sum += e;
    sq_sum += e * e;
    if (e <= tolerance) ++ok;
  }
  const auto n = static_cast<double>(predicted.size());
  return {abs_sum / n, std::sqrt(sq_sum / n), static_cast<double>(ok) / n};
}

Forecaster::Forecaster(ForecasterConfig cfg, FeatureSpec spec, Normalizer norm, std::mt19937_64& rng)
    : spec_(std::move(spec)), norm_(std::move(norm)), net_(cfg, spec_.features.size(), rng) {
  if (norm_.mean.size() != spec_.features.size()) {
    throw std::invalid_argument("forecaster: normalizer covers " + std::to_string(norm_.mean.size()) +
                                " features, spec lists " + std::to_string(spec_.features.size()));
  }
}

double Forecaster::predict(std::span<const double> raw_window) const {
  const std::size_t T = config().window, F = spec_.features.size();
  if (raw_window.size() != T * F) {
    throw std::invalid_argument("forecaster.predict: expected a " + std::to_string(T) + " x " + std::to_string(F) +
                                " window, got " + std::to_string(raw_window.size()) + " values");
  }
  diff::Tensor x({1, T, F});
  auto xv = x.mutable_values();
  for (std::size_t t = 0; t < T; ++t) norm_.normalize_row(raw_window.subspan(t * F, F), xv.subspan(t * F, F));
  diff::Tape tape(diff::Tape::Mode::inference);
  return norm_.denormalize_target(net_.forward(tape, x, false, nullptr).item());
}

std::vector<double> Forecaster::predict(const PreparedData& data, std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t begin = 0; begin < indices.size(); begin += kEvalBatch) {
    const auto chunk = indices.subspan(begin, std::min(kEvalBatch, indices.size() - begin));
    auto batch = make_batch(data, chunk);
    diff::Tape tape(diff::Tape::Mode::inference);
    auto pred = net_.forward(tape, batch.inputs, false, nullptr);
    for (double z : pred.values()) out.push_back(norm_.denormalize_target(z));
  }
  return out;
}

void Forecaster::save(const std::filesystem::path& path) const {
  nlohmann::json meta{{"config", config().to_json()}, {"spec", spec_to_json(spec_)}, {"normalizer", norm_.to_json()}};
  neuro::save_checkpoint(path, net_.parameters(), net_.fingerprint(), std::move(meta));
}

Forecaster Forecaster::load(const std::filesystem::path& path) {
  const auto doc = neuro::read_json_file(path);
  const auto& meta = doc.at("metadata");
  std::mt19937_64 rng(0);
  Forecaster f(ForecasterConfig::from_json(meta.at("config")), spec_from_json(meta.at("spec")),
               Normalizer::from_json(meta.at("normalizer")), rng);
  neuro::restore_checkpoint(doc, f.net_.parameters(), f.net_.fingerprint());
  return f;
}

TrainResult train_forecaster(const ForecasterConfig& cfg, const FeatureSpec& spec, const PreparedData& data,
                             std::mt19937_64& rng, const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("train_forecaster: empty training set");
  if (data.validation.empty() || data.test.empty()) {
    throw std::invalid_argument("train_forecaster: validation and test splits must be non-empty");
  }
  if (data.window != cfg.window) throw std::invalid_argument("train_forecaster: data window differs from config");
  if (data.features != spec.features.size()) {
    throw std::invalid_argument("train_forecaster: data feature count differs from spec");
  }

  TrainResult result{Forecaster(cfg, spec, data.norm, rng), {}, 0, {}};
  auto& net = result.model.net();
  diff::Adam adam(net.parameters(), diff::AdamOptions{cfg.lr});
  auto best = net.parameters().clone();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<double> val_actual;
  for (auto t : data.validation) val_actual.push_back(data.target_after(t));

  auto order = data.train;
  const std::size_t B = std::min(cfg.batch_size, order.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batches = (order.size() + B - 1) / B;
    if (cfg.max_batches_per_epoch > 0) batches = std::min(batches, cfg.max_batches_per_epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto idx = std::span<const std::size_t>(order).subspan(b * B, std::min(B, order.size() - b * B));
      auto batch = make_batch(data, idx);
      diff::Tape tape;
      auto pred = net.forward(tape, batch.inputs, true, &rng);
      auto err = diff::sub(tape, pred, batch.targets);
      auto loss = diff::mean(tape, diff::maximum(tape, err, diff::neg(tape, err)));
      if (!std::isfinite(loss.item())) {
        throw std::runtime_error("train_forecaster: non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      adam.step();
      loss_sum += loss.item();
    }
    const auto val_pred = result.model.predict(data, data.validation);
    const double val_mae = evaluate(val_pred, val_actual, spec.tolerance).mae;
    EpochStats stats{epoch, loss_sum / static_cast<double>(batches), val_mae};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (val_mae < best_val) {
      best_val = val_mae;
      best.copy_values_from(net.parameters());
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  net.parameters().copy_values_from(best);
  net.parameters().zero_grad();

  std::vector<double> test_actual;
  for (auto t : data.test) test_actual.push_back(data.target_after(t));
  result.test = evaluate(result.model.predict(data, data.test), test_actual, spec.tolerance);
  return result;
}

std::vector<double> ridge_fit(std::span<const double> X, std::span<const double> y, std::size_t d, double ridge) {
  if (d == 0 || y.empty() || X.size() != y.size() * d) throw std::invalid_argument("ridge_fit: inconsistent sizes");
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge_fit: ridge must be >= 0");
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd A(n, dd + 1);
  A.leftCols(dd) = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(X.data(), n, dd);
  A.col(dd).setOnes();
  Eigen::MatrixXd G = A.transpose() * A;
  G.diagonal().head(dd).array() += ridge;
  const Eigen::VectorXd rhs = A.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < kMinRcond) {
    throw std::runtime_error("ridge_fit: normal equations are singular even with ridge damping " +
                             std::to_string(ridge));
  }
  const Eigen::VectorXd beta = ldlt.solve(rhs);
  if (!beta.allFinite()) throw std::runtime_error("ridge_fit: non-finite solution");
  return {beta.data(), beta.data() + beta.size()};
}

namespace {

std::vector<double> linreg_inputs(const PreparedData& data, std::span<const std::size_t> idx, LinRegInputs inputs) {
  const std::size_t F = data.features, T = data.window;
  std::vector<double> X(idx.size() * F, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t t = idx[i];
    if (inputs == LinRegInputs::last_step) {
      std::copy_n(data.x.begin() + static_cast<std::ptrdiff_t>(t * F), F, X.begin() + static_cast<std::ptrdiff_t>(i * F));
    } else {
      for (std::size_t r = t + 1 - T; r <= t; ++r)
        for (std::size_t f = 0; f < F; ++f) X[i * F + f] += data.x[r * F + f] / static_cast<double>(T);
    }
  }
  return X;
}

}  // namespace

LinRegModel linreg_baseline(const PreparedData& data, double tolerance, LinRegInputs inputs, double ridge) {
  if (data.train.empty() || data.test.empty()) throw std::invalid_argument("linreg_baseline: empty split");
  const std::size_t F = data.features;
  std::vector<double> y;
  for (auto t : data.train) y.push_back(data.target_after(t));
  auto beta = ridge_fit(linreg_inputs(data, data.train, inputs), y, F, ridge);
  LinRegModel m;
  m.coef.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(F));
  m.intercept = beta.back();
  const auto Xt = linreg_inputs(data, data.test, inputs);
  std::vector<double> pred, actual;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    pred.push_back(m.intercept + std::inner_product(m.coef.begin(), m.coef.end(),
                                                    Xt.begin() + static_cast<std::ptrdiff_t>(i * F), 0.0));
    actual.push_back(data.target_after(data.test[i]));
  }
  m.test = evaluate(pred, actual, tolerance);
  return m;
}

}  // namespace mpd::forecast
