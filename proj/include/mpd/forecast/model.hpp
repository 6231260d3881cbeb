#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mpd/forecast/data.hpp"
#include "mpd/forecast/lstnet.hpp"

namespace mpd::forecast {

struct ForecastMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double qualification_rate = 0.0;
};

/// Errors within `tolerance` (inclusive) count as qualified. Throws on empty
/// input, a size mismatch or tolerance <= 0.
ForecastMetrics evaluate(std::span<const double> predicted, std::span<const double> actual, double tolerance);

/// A trained network together with its feature schema and normalization.
class Forecaster {
 public:
  Forecaster(ForecasterConfig cfg, FeatureSpec spec, Normalizer norm, std::mt19937_64& rng);

  /// raw: [T x F] row-major readings in spec feature order; returns mm.
  double predict(std::span<const double> raw_window) const;
  /// Predictions (mm) for windows of prepared data.
  std::vector<double> predict(const PreparedData& data, std::span<const std::size_t> indices) const;

  const ForecasterConfig& config() const { return net_.config(); }
  const FeatureSpec& spec() const { return spec_; }
  const Normalizer& normalizer() const { return norm_; }
  LstNet& net() { return net_; }
  const LstNet& net() const { return net_; }

  void save(const std::filesystem::path& path) const;
  static Forecaster load(const std::filesystem::path& path);

 private:
  FeatureSpec spec_;
  Normalizer norm_;
  LstNet net_;
};

struct EpochStats {
  std::size_t epoch;
  double train_mae;  // normalized units, mean over minibatches
  double val_mae;    // mm
};

struct TrainResult {
  Forecaster model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  ForecastMetrics test;
};

/// Adam on the MAE loss over shuffled minibatches; keeps the parameters with
/// the best validation MAE. Throws on an empty training split.
TrainResult train_forecaster(const ForecasterConfig& cfg, const FeatureSpec& spec, const PreparedData& data,
                             std::mt19937_64& rng, const std::function<void(const EpochStats&)>& on_epoch = {});

enum class LinRegInputs { last_step, window_mean };

struct LinRegModel {
  std::vector<double> coef;  // one per feature, normalized feature units
  double intercept = 0.0;    // mm
  ForecastMetrics test;
};

/// Ridge-damped least squares via the normal equations. X is [n x d]
/// row-major; an intercept column is added internally and left undamped.
/// Returns d coefficients followed by the intercept. Throws if the damped
/// system is still singular.
std::vector<double> ridge_fit(std::span<const double> X, std::span<const double> y, std::size_t d,
                              double ridge = 1e-6);

LinRegModel linreg_baseline(const PreparedData& data, double tolerance, LinRegInputs inputs = LinRegInputs::last_step,
                            double ridge = 1e-6);

}  // namespace mpd::forecast
