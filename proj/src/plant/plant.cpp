#include "mpd/plant/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mpd::plant {

namespace {

// Readings never go below this (mm); the noise model is otherwise unbounded.
constexpr double kPositiveFloor = 1e-3;

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw std::invalid_argument("plant." + field + " " + why);
}

}  // namespace

double Bounds::clamp(double v) const { return std::clamp(v, lo, hi); }

void PlantParams::validate() const {
  require(alpha_w > 0.0 && alpha_w <= 1.0, "alpha_w", "must lie in (0, 1]");
  require(alpha_h > 0.0 && alpha_h <= 1.0, "alpha_h", "must lie in (0, 1]");
  require(sigma_w >= 0.0, "sigma_w", "must be >= 0");
  require(sigma_h >= 0.0, "sigma_h", "must be >= 0");
  require(shrink > 0.0 && knife_gain > 0.0, "shrink", "and knife_gain must be > 0");
  require(couple >= 0.0, "couple", "must be >= 0");
  require(draw > 0.0 && gap_gain > 0.0, "draw", "and gap_gain must be > 0");
  require(knife_bounds.lo > 0.0 && knife_bounds.lo < knife_bounds.hi, "knife_bounds", "must satisfy 0 < lo < hi");
  require(gap_bounds.lo > 0.0 && gap_bounds.lo < gap_bounds.hi, "gap_bounds", "must satisfy 0 < lo < hi");
  for (const auto& a : aux) {
    require(!a.name.empty(), "aux", "channel names must not be empty");
    require(std::abs(a.rho) < 1.0, "aux." + a.name + ".rho", "must satisfy |rho| < 1");
    require(a.noise >= 0.0, "aux." + a.name + ".noise", "must be >= 0");
  }
}

std::vector<AuxChannel> PlantParams::default_aux_channels() {
  // name, mean, rho, noise, knife gain, gap gain
  return {
      {"calender_motor_current", 180.0, 0.95, 1.5, 0.05, -40.0},
      {"calender_line_speed", 25.0, 0.98, 0.1, 0.0, 0.0},
      {"calender_discharge_temp", 95.0, 0.97, 0.3, 0.0, -2.0},
      {"draw_roll_speed", 26.0, 0.98, 0.1, 0.0, 0.0},
      {"conveyor_belt_speed", 24.0, 0.98, 0.1, 0.0, 0.0},
      {"top_roll_temp", 85.0, 0.98, 0.2, 0.0, 0.0},
      {"bottom_roll_temp", 88.0, 0.98, 0.2, 0.0, 0.0},
      {"extruder_motor_current", 220.0, 0.95, 2.0, 0.0, 0.0},
      {"extruder_screw_speed", 40.0, 0.98, 0.2, 0.0, 0.0},
      {"extruder_head_pressure", 120.0, 0.9, 1.0, 0.0, -10.0},
      {"extruder_head_temp", 100.0, 0.97, 0.3, 0.0, 0.0},
      {"screw_tip_pressure", 140.0, 0.9, 1.2, 0.0, -8.0},
      {"head_temp_setpoint", 100.0, 0.99, 0.01, 0.0, 0.0},
      {"plasticizing_zone1_temp", 75.0, 0.97, 0.3, 0.0, 0.0},
      {"plasticizing_zone2_temp", 82.0, 0.97, 0.3, 0.0, 0.0},
      {"extruder_barrel_temp", 70.0, 0.97, 0.3, 0.0, 0.0},
      {"extruder_screw_temp", 65.0, 0.97, 0.3, 0.0, 0.0},
      {"extruder_outlet_temp", 102.0, 0.97, 0.3, 0.0, 0.0},
      {"extruder_outlet_pressure", 130.0, 0.9, 1.0, 0.0, -10.0},
      {"screw_temp_setpoint", 65.0, 0.99, 0.01, 0.0, 0.0},
      {"sheet_temp_after_calender", 90.0, 0.97, 0.3, 0.0, 3.0},
      {"prick_roll_temp", 60.0, 0.97, 0.3, 0.0, 0.0},
      {"extrusion_section_temp", 95.0, 0.97, 0.3, 0.0, 0.0},
  };
}

SteadyState steady_state(const PlantParams& p, const SetPoints& u) {
  const double mg = u.mean_gap();
  return {p.knife_gain * p.shrink * u.knife - p.couple * (mg - p.ref_gap),
          p.gap_gain * p.draw * mg + p.skew * (u.ds_gap - u.os_gap)};
}

std::vector<double> aux_means(const PlantParams& p, const SetPoints& u) {
  std::vector<double> m;
  m.reserve(p.aux.size());
  for (const auto& a : p.aux)
    m.push_back(a.mean + a.knife_gain * (u.knife - p.knife_ref) + a.gap_gain * (u.mean_gap() - p.ref_gap));
  return m;
}

PlantState settled_state(const PlantParams& p, const SetPoints& u) {
  const auto ss = steady_state(p, u);
  return {std::max(ss.width, kPositiveFloor), std::max(ss.thickness, kPositiveFloor), u, aux_means(p, u)};
}

PlantState plant_step(const PlantState& s, const PlantParams& p, std::mt19937_64& rng) {
  if (!p.knife_bounds.contains(s.set.knife) || !p.gap_bounds.contains(s.set.ds_gap) ||
      !p.gap_bounds.contains(s.set.os_gap)) {
    throw std::invalid_argument("plant_step: set-points outside actuator bounds");
  }
  if (s.aux.size() != p.aux.size()) throw std::invalid_argument("plant_step: auxiliary vector size mismatch");
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto ss = steady_state(p, s.set);
  PlantState next = s;
  // Noise is only drawn when it matters so that zero-noise runs consume no
  // random numbers and remain exactly reproducible against closed forms.
  const double ew = p.sigma_w > 0.0 ? p.sigma_w * n01(rng) : 0.0;
  const double eh = p.sigma_h > 0.0 ? p.sigma_h * n01(rng) : 0.0;
  next.width = std::max(s.width + p.alpha_w * (ss.width - s.width) + ew, kPositiveFloor);
  next.thickness = std::max(s.thickness + p.alpha_h * (ss.thickness - s.thickness) + eh, kPositiveFloor);
  const auto mu = aux_means(p, s.set);
  for (std::size_t i = 0; i < p.aux.size(); ++i) {
    const auto& a = p.aux[i];
    const double e = a.noise > 0.0 ? a.noise * n01(rng) : 0.0;
    next.aux[i] = mu[i] + a.rho * (s.aux[i] - mu[i]) + e;
  }
  return next;
}

Excitation parse_excitation(const std::string& name) {
  if (name == "none") return Excitation::none;
  if (name == "random-walk") return Excitation::random_walk;
  if (name == "steps") return Excitation::steps;
  if (name == "mixed") return Excitation::mixed;
  throw std::invalid_argument("unknown excitation '" + name + "' (expected none, random-walk, steps or mixed)");
}

std::string to_string(Excitation e) {
  switch (e) {
    case Excitation::none: return "none";
    case Excitation::random_walk: return "random-walk";
    case Excitation::steps: return "steps";
    case Excitation::mixed: return "mixed";
  }
  return "?";
}

std::size_t Series::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("series has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Series::column_values(const std::string& name) const {
  const auto c = column(name);
  std::vector<double> v(rows());
  for (std::size_t r = 0; r < v.size(); ++r) v[r] = at(r, c);
  return v;
}

std::vector<std::string> series_columns(const PlantParams& p) {
  std::vector<std::string> cols{kKnife, kDsGap, kOsGap, kWidth, kThickness};
  for (const auto& a : p.aux) cols.push_back(a.name);
  return cols;
}

namespace {

SetPoints random_setpoints(const PlantParams& p, const ExcitationConfig& ex, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> knife(p.knife_bounds.lo, p.knife_bounds.hi);
  std::uniform_real_distribution<double> gap(p.gap_bounds.lo, p.gap_bounds.hi);
  std::normal_distribution<double> split(0.0, ex.gap_split_sigma);
  SetPoints u;
  u.knife = knife(rng);
  const double mg = gap(rng);
  const double d = ex.gap_split_sigma > 0.0 ? split(rng) : 0.0;
  u.ds_gap = p.gap_bounds.clamp(mg + 0.5 * d);
  u.os_gap = p.gap_bounds.clamp(mg - 0.5 * d);
  return u;
}

// Reflects a random-walk proposal back into [lo, hi].
double reflect(double v, const Bounds& b) {
  if (v > b.hi) v = 2.0 * b.hi - v;
  if (v < b.lo) v = 2.0 * b.lo - v;
  return b.clamp(v);
}

}  // namespace

Series generate_dataset(const PlantParams& p, std::size_t n_steps, const ExcitationConfig& ex, std::mt19937_64& rng,
                        std::size_t min_steps) {
  p.validate();
  if (n_steps < min_steps) {
    throw std::invalid_argument("generate_dataset: n_steps " + std::to_string(n_steps) + " is below the minimum " +
                                std::to_string(min_steps));
  }
  Series s;
  s.columns = series_columns(p);
  s.data.reserve(n_steps * s.columns.size());

  auto state = settled_state(p, random_setpoints(p, ex, rng));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool walk = ex.kind == Excitation::random_walk || ex.kind == Excitation::mixed;
  const bool jumps = ex.kind == Excitation::steps || ex.kind == Excitation::mixed;

  for (std::size_t t = 0; t < n_steps; ++t) {
    if (t > 0) {
      auto& u = state.set;
      if (jumps && u01(rng) < ex.jump_probability) {
        u = random_setpoints(p, ex, rng);
      } else if (walk) {
        u.knife = reflect(u.knife + ex.knife_walk_sigma * n01(rng), p.knife_bounds);
        const double common = ex.gap_walk_sigma * n01(rng);
        const double diff = 0.25 * ex.gap_walk_sigma * n01(rng);
        u.ds_gap = reflect(u.ds_gap + common + diff, p.gap_bounds);
        u.os_gap = reflect(u.os_gap + common - diff, p.gap_bounds);
      }
    }
    s.data.insert(s.data.end(), {state.set.knife, state.set.ds_gap, state.set.os_gap, state.width, state.thickness});
    s.data.insert(s.data.end(), state.aux.begin(), state.aux.end());
    state = plant_step(state, p, rng);
  }
  return s;
}

void write_series_csv(const std::filesystem::path& path, const Series& s) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < s.cols(); ++c) out << (c ? "," : "") << s.columns[c];
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < s.cols(); ++c) out << (c ? "," : "") << s.at(r, c);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Series read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Series s;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header row");
  {
    std::stringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) s.columns.push_back(name);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        s.data.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++n;
    }
    if (n != s.columns.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(s.columns.size()) + " fields, got " + std::to_string(n));
    }
  }
  return s;
}

}  // namespace mpd::plant
