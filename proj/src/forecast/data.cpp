#include "mpd/forecast/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpd::forecast {

namespace {

// Features with (near) zero training variance are only centered.
constexpr double kMinStd = 1e-12;

}  // namespace

FeatureSpec width_spec() {
  return {"width",
          plant::kWidth,
          {"calender_motor_current", "calender_line_speed", "calender_discharge_temp", "draw_roll_speed",
           "conveyor_belt_speed", plant::kKnife, "top_roll_temp", "bottom_roll_temp", "extruder_motor_current",
           "extruder_screw_speed", "extruder_head_pressure", "extruder_head_temp", "screw_tip_pressure",
           "head_temp_setpoint", "plasticizing_zone1_temp", "plasticizing_zone2_temp", "extruder_barrel_temp",
           "extruder_screw_temp", plant::kDsGap, plant::kOsGap},
          1.0};
}

FeatureSpec thickness_spec() {
  return {"thickness",
          plant::kThickness,
          {"extruder_screw_speed", "extruder_motor_current", "extruder_outlet_temp", "extruder_outlet_pressure",
           "screw_tip_pressure", "screw_temp_setpoint", "plasticizing_zone1_temp", "plasticizing_zone2_temp",
           "extruder_head_temp", "calender_line_speed", "calender_motor_current", "sheet_temp_after_calender",
           plant::kDsGap, plant::kOsGap, plant::kKnife, "prick_roll_temp", "extrusion_section_temp"},
          0.05};
}

void Normalizer::normalize_row(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != mean.size() || out.size() != mean.size()) {
    throw std::invalid_argument("normalize_row: expected " + std::to_string(mean.size()) + " features, got " +
                                std::to_string(raw.size()));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean[i]) / std[i];
}

nlohmann::json Normalizer::to_json() const {
  return {{"mean", mean}, {"std", std}, {"target_mean", target_mean}, {"target_std", target_std}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.std = j.at("std").get<std::vector<double>>();
  n.target_mean = j.at("target_mean").get<double>();
  n.target_std = j.at("target_std").get<double>();
  if (n.mean.size() != n.std.size()) throw std::runtime_error("normalizer mean/std size mismatch");
  return n;
}

PreparedData prepare(const plant::Series& series, const FeatureSpec& spec, std::size_t window, SplitFractions split) {
  if (window == 0) throw std::invalid_argument("prepare: window must be >= 1");
  if (!(split.train > 0.0 && split.validation > 0.0 && split.train + split.validation < 1.0)) {
    throw std::invalid_argument("prepare: split fractions must be positive and leave room for a test split");
  }
  const std::size_t rows = series.rows();
  if (rows < window + 1) throw std::invalid_argument("prepare: series is shorter than one window plus a target");

  std::vector<std::size_t> cols;
  for (const auto& f : spec.features) cols.push_back(series.column(f));
  const std::size_t target_col = series.column(spec.target);

  // Window end indices t in [T-1, rows-2].
  const std::size_t first = window - 1, count = rows - 1 - first;
  const auto n_train = static_cast<std::size_t>(std::floor(split.train * static_cast<double>(count)));
  const auto n_val = static_cast<std::size_t>(std::floor(split.validation * static_cast<double>(count)));
  PreparedData d;
  d.window = window;
  d.features = cols.size();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = first + i;
    if (i < n_train) {
      d.train.push_back(t);
    } else if (i >= n_train + window && i < n_train + n_val) {
      d.validation.push_back(t);
    } else if (i >= n_train + n_val + window) {
      d.test.push_back(t);
    }
  }
  if (d.train.empty() || d.validation.empty() || d.test.empty()) {
    throw std::invalid_argument("prepare: series of " + std::to_string(rows) +
                                " rows is too short for a train/validation/test split");
  }

  // Training rows: everything a training window or its target touches.
  const std::size_t train_rows = d.train.back() + 2;
  const std::size_t F = cols.size();
  d.norm.mean.assign(F, 0.0);
  d.norm.std.assign(F, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    double m = 0.0;
    for (std::size_t r = 0; r < train_rows; ++r) m += series.at(r, cols[f]);
    m /= static_cast<double>(train_rows);
    double v = 0.0;
    for (std::size_t r = 0; r < train_rows; ++r) v += (series.at(r, cols[f]) - m) * (series.at(r, cols[f]) - m);
    const double sd = std::sqrt(v / static_cast<double>(train_rows));
    d.norm.mean[f] = m;
    d.norm.std[f] = sd > kMinStd ? sd : 1.0;
  }
  {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < train_rows; ++r) m += series.at(r, target_col);
    m /= static_cast<double>(train_rows);
    for (std::size_t r = 0; r < train_rows; ++r) v += (series.at(r, target_col) - m) * (series.at(r, target_col) - m);
    const double sd = std::sqrt(v / static_cast<double>(train_rows));
    d.norm.target_mean = m;
    d.norm.target_std = sd > kMinStd ? sd : 1.0;
  }

  d.x.resize(rows * F);
  d.y.resize(rows);
  std::vector<double> raw(F);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < F; ++f) raw[f] = series.at(r, cols[f]);
    d.norm.normalize_row(raw, std::span<double>(d.x).subspan(r * F, F));
    d.y[r] = series.at(r, target_col);
  }
  return d;
}

Batch make_batch(const PreparedData& data, std::span<const std::size_t> indices) {
  const std::size_t B = indices.size(), T = data.window, F = data.features;
  if (B == 0) throw std::invalid_argument("make_batch: no indices");
  std::vector<double> x(B * T * F), y(B);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t t = indices[b];
    if (t + 1 < T || t + 1 >= data.rows()) throw std::out_of_range("make_batch: window index out of range");
    const auto begin = data.x.begin() + static_cast<std::ptrdiff_t>((t + 1 - T) * F);
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(T * F), x.begin() + static_cast<std::ptrdiff_t>(b * T * F));
    y[b] = data.norm.normalize_target(data.target_after(t));
  }
  return {diff::Tensor({B, T, F}, std::move(x)), diff::Tensor({B, 1}, std::move(y))};
}

}  // namespace mpd::forecast
