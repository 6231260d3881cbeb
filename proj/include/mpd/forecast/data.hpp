#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpd/diff/tensor.hpp"
#include "mpd/plant/plant.hpp"

namespace mpd::forecast {

/// Which series column a model predicts, from which input columns, and the
/// qualification tolerance (mm) used for its metrics.
struct FeatureSpec {
  std::string name;
  std::string target;
  std::vector<std::string> features;
  double tolerance = 1.0;
};

/// Width model: Table I process readings with the knife spacing, plus both
/// roll gaps because the gap couples into width.
FeatureSpec width_spec();
/// Thickness model: Table II process readings with both roll gaps and the
/// knife spacing.
FeatureSpec thickness_spec();

/// Per-feature z-scoring plus target scaling, fitted on training rows only.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;
  double target_mean = 0.0;
  double target_std = 1.0;

  double normalize_target(double y) const { return (y - target_mean) / target_std; }
  double denormalize_target(double z) const { return z * target_std + target_mean; }
  void normalize_row(std::span<const double> raw, std::span<double> out) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
};

/// Windows over a normalized feature matrix. A window index t covers rows
/// [t - T + 1, t] and predicts the target at row t + 1.
struct PreparedData {
  std::size_t window = 0;
  std::size_t features = 0;
  std::vector<double> x;  // normalized [rows x features]
  std::vector<double> y;  // raw target per row (mm)
  std::vector<std::size_t> train, validation, test;
  Normalizer norm;

  std::size_t rows() const { return y.size(); }
  double target_after(std::size_t t) const { return y.at(t + 1); }
};

/// Chronological split; `window` indices are dropped at each boundary so no
/// target row is shared between splits. Normalization statistics come from the
/// training rows only. Throws if any split ends up empty.
PreparedData prepare(const plant::Series& series, const FeatureSpec& spec, std::size_t window,
                     SplitFractions split = {});

/// Batch tensors for the given window indices.
struct Batch {
  diff::Tensor inputs;   // [B x T x F], normalized
  diff::Tensor targets;  // [B x 1], normalized
};
Batch make_batch(const PreparedData& data, std::span<const std::size_t> indices);

}  // namespace mpd::forecast
