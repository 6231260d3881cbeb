#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mpd::plant {

/// AR(1) auxiliary reading whose mean shifts linearly with the controls:
/// mean(u) = mean + knife_gain (knife - knife_ref) + gap_gain (mean_gap - ref_gap).
struct AuxChannel {
  std::string name;
  double mean = 0.0;
  double rho = 0.9;
  double noise = 0.0;
  double knife_gain = 0.0;
  double gap_gain = 0.0;
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  double clamp(double v) const;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double span() const { return hi - lo; }
};

struct PlantParams {
  // Width: width_ss = knife_gain * shrink * knife - couple * (mean_gap - ref_gap).
  double knife_gain = 1.0;
  double shrink = 0.985;
  double couple = 20.0;
  double alpha_w = 0.6;
  double sigma_w = 0.3;
  // Thickness: thickness_ss = gap_gain * draw * mean_gap + skew * (ds - os).
  double gap_gain = 1.0;
  double draw = 1.0;
  double skew = 0.05;
  double alpha_h = 0.5;
  double sigma_h = 0.02;
  double ref_gap = 3.0;
  double knife_ref = 430.0;

  Bounds knife_bounds{360.0, 500.0};
  Bounds gap_bounds{1.8, 3.6};
  std::vector<AuxChannel> aux = default_aux_channels();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  static std::vector<AuxChannel> default_aux_channels();
};

struct SetPoints {
  double knife = 430.0;
  double ds_gap = 3.0;
  double os_gap = 3.0;
  double mean_gap() const { return 0.5 * (ds_gap + os_gap); }
};

struct PlantState {
  double width = 0.0;
  double thickness = 0.0;
  SetPoints set;
  std::vector<double> aux;
};

struct SteadyState {
  double width;
  double thickness;
};

SteadyState steady_state(const PlantParams& p, const SetPoints& u);
std::vector<double> aux_means(const PlantParams& p, const SetPoints& u);
/// Plant resting at the steady state of `u`, auxiliaries at their means.
PlantState settled_state(const PlantParams& p, const SetPoints& u);

/// One sampling interval under the state's current set-points. Set-points
/// are carried over unchanged.
PlantState plant_step(const PlantState& state, const PlantParams& p, std::mt19937_64& rng);

enum class Excitation { none, random_walk, steps, mixed };
Excitation parse_excitation(const std::string& name);
std::string to_string(Excitation e);

struct ExcitationConfig {
  Excitation kind = Excitation::mixed;
  double knife_walk_sigma = 1.5;  // mm per step
  double gap_walk_sigma = 0.015;  // mm per step
  double jump_probability = 0.03;
  double gap_split_sigma = 0.03;  // DS/OS difference at a jump, mm
};

/// Chronological multivariate series. Row t holds the set-points in force
/// during interval t and the readings observed at its start.
struct Series {
  std::vector<std::string> columns;
  std::vector<double> data;  // row-major [rows x columns]

  std::size_t rows() const { return columns.empty() ? 0 : data.size() / columns.size(); }
  std::size_t cols() const { return columns.size(); }
  double at(std::size_t row, std::size_t col) const { return data[row * columns.size() + col]; }
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

inline const std::string kKnife = "knife_spacing";
inline const std::string kDsGap = "ds_roll_gap";
inline const std::string kOsGap = "os_roll_gap";
inline const std::string kWidth = "width";
inline const std::string kThickness = "thickness";

/// Column names in series order: set-points, targets, auxiliaries.
std::vector<std::string> series_columns(const PlantParams& p);

/// Throws if n_steps < min_steps (a forecaster window plus one target).
Series generate_dataset(const PlantParams& p, std::size_t n_steps, const ExcitationConfig& excitation,
                        std::mt19937_64& rng, std::size_t min_steps = 33);

void write_series_csv(const std::filesystem::path& path, const Series& s);
Series read_series_csv(const std::filesystem::path& path);

}  // namespace mpd::plant
