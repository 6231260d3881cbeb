#include "mpd/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace mpd::env {

namespace {

constexpr std::size_t kMaxResetDraws = 10000;

}  // namespace

void EpisodeConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* why) {
    if (!ok) throw std::invalid_argument(std::string("env.") + field + " " + why);
  };
  require(max_steps >= 1, "max_steps", "must be >= 1");
  require(knife_scale > 0.0, "knife_scale", "must be > 0");
  require(gap_scale > 0.0, "gap_scale", "must be > 0");
  require(width_tolerance > 0.0, "width_tolerance", "must be > 0");
  require(thickness_tolerance > 0.0, "thickness_tolerance", "must be > 0");
  require(init_knife_offset >= 0.0, "init_knife_offset", "must be >= 0");
  require(init_gap_offset >= 0.0, "init_gap_offset", "must be >= 0");
  require(init_gap_split >= 0.0, "init_gap_split", "must be >= 0");
  require(min_width_error >= 0.0, "min_width_error", "must be >= 0");
  require(min_thickness_error >= 0.0, "min_thickness_error", "must be >= 0");
}

std::size_t state_dim(std::size_t history) { return kObjectives * (3 + history) + 3; }

// ---------------------------------------------------------------------------

SurrogateBackend::SurrogateBackend(std::shared_ptr<const forecast::Forecaster> width,
                                   std::shared_ptr<const forecast::Forecaster> thickness, plant::PlantParams params)
    : width_(std::move(width)), thickness_(std::move(thickness)), params_(std::move(params)) {
  if (!width_ || !thickness_) throw std::invalid_argument("surrogate environment: forecaster not loaded");
  T_ = width_->config().window;
  if (thickness_->config().window != T_) {
    throw std::invalid_argument("surrogate environment: width and thickness forecasters use different windows");
  }
  channels_ = {plant::kKnife, plant::kDsGap, plant::kOsGap};
  for (const auto& a : params_.aux) channels_.push_back(a.name);
  auto map = [&](const forecast::FeatureSpec& spec) {
    std::vector<std::size_t> cols;
    for (const auto& f : spec.features) {
      auto it = std::find(channels_.begin(), channels_.end(), f);
      if (it == channels_.end()) {
        throw std::invalid_argument("surrogate environment: forecaster feature '" + f +
                                    "' is not produced by the plant configuration");
      }
      cols.push_back(static_cast<std::size_t>(it - channels_.begin()));
    }
    return cols;
  };
  width_cols_ = map(width_->spec());
  thickness_cols_ = map(thickness_->spec());
}

std::vector<double> SurrogateBackend::row_for(const plant::SetPoints& u, std::span<const double> prev_aux) const {
  std::vector<double> row{u.knife, u.ds_gap, u.os_gap};
  const auto mu = plant::aux_means(params_, u);
  for (std::size_t i = 0; i < mu.size(); ++i)
    row.push_back(prev_aux.empty() ? mu[i] : mu[i] + params_.aux[i].rho * (prev_aux[i] - mu[i]));
  return row;
}

Backend::Outputs SurrogateBackend::reset(const plant::SetPoints& u) {
  const auto row = row_for(u, {});
  window_.clear();
  for (std::size_t t = 0; t < T_; ++t) window_.insert(window_.end(), row.begin(), row.end());
  return predict();
}

Backend::Outputs SurrogateBackend::step(const plant::SetPoints& u) {
  if (window_.empty()) throw std::logic_error("surrogate environment: step before reset");
  const std::size_t C = channels_.size();
  const auto prev_aux = std::span<const double>(window_).subspan((T_ - 1) * C + 3, C - 3);
  const auto row = row_for(u, prev_aux);
  window_.erase(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(C));
  window_.insert(window_.end(), row.begin(), row.end());
  return predict();
}

Backend::Outputs SurrogateBackend::predict() const {
  const std::size_t C = channels_.size();
  auto extract = [&](const std::vector<std::size_t>& cols) {
    std::vector<double> w(T_ * cols.size());
    for (std::size_t t = 0; t < T_; ++t)
      for (std::size_t f = 0; f < cols.size(); ++f) w[t * cols.size() + f] = window_[t * C + cols[f]];
    return w;
  };
  return {width_->predict(extract(width_cols_)), thickness_->predict(extract(thickness_cols_))};
}

PlantBackend::PlantBackend(plant::PlantParams params, std::uint64_t seed) : params_(std::move(params)), rng_(seed) {
  params_.validate();
}

Backend::Outputs PlantBackend::reset(const plant::SetPoints& u) {
  state_ = plant::settled_state(params_, u);
  return {state_.width, state_.thickness};
}

Backend::Outputs PlantBackend::step(const plant::SetPoints& u) {
  state_.set = u;
  state_ = plant::plant_step(state_, params_, rng_);
  return {state_.width, state_.thickness};
}

// ---------------------------------------------------------------------------

Environment::Environment(EpisodeConfig episode, RewardConfig reward, plant::PlantParams params,
                         std::unique_ptr<Backend> backend, std::uint64_t seed)
    : episode_(std::move(episode)),
      reward_(std::move(reward)),
      params_(std::move(params)),
      backend_(std::move(backend)),
      rng_(seed) {
  episode_.validate();
  reward_.validate();
  params_.validate();
  reward_.weights = normalize_weights(reward_.weights);

  const double mg = episode_.thickness_target / (params_.gap_gain * params_.draw);
  const double knife =
      (episode_.width_target + params_.couple * (mg - params_.ref_gap)) / (params_.knife_gain * params_.shrink);
  if (!params_.gap_bounds.contains(mg) || !params_.knife_bounds.contains(knife)) {
    throw std::invalid_argument("targets width " + std::to_string(episode_.width_target) + " mm / thickness " +
                                std::to_string(episode_.thickness_target) +
                                " mm are outside the reachable range of the actuator bounds");
  }
  nominal_ = {knife, mg, mg};
  objectives_[0].name = "width";
  objectives_[0].target = episode_.width_target;
  objectives_[0].tolerance = episode_.width_tolerance;
  objectives_[1].name = "thickness";
  objectives_[1].target = episode_.thickness_target;
  objectives_[1].tolerance = episode_.thickness_tolerance;
}

void Environment::set_objective_weights(std::array<double, kObjectives> weights) {
  reward_.weights = normalize_weights(weights);
}

void Environment::observe(const Backend::Outputs& out) {
  objectives_[0].value = out.width;
  objectives_[1].value = out.thickness;
  for (auto& o : objectives_) o.error = std::abs(o.value - o.target) / o.tolerance;
  objectives_[0].control = {set_.knife / episode_.knife_scale};
  objectives_[1].control = {set_.ds_gap / episode_.gap_scale, set_.os_gap / episode_.gap_scale};
}

std::vector<double> Environment::reset() {
  if (!backend_) throw std::logic_error("environment: forecaster not loaded");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t draw = 0; draw < kMaxResetDraws; ++draw) {
    plant::SetPoints u;
    u.knife = params_.knife_bounds.clamp(nominal_.knife + episode_.init_knife_offset * unit(rng_));
    const double mg = nominal_.mean_gap() + episode_.init_gap_offset * unit(rng_);
    const double split = episode_.init_gap_split * n01(rng_);
    u.ds_gap = params_.gap_bounds.clamp(mg + 0.5 * split);
    u.os_gap = params_.gap_bounds.clamp(mg - 0.5 * split);
    const auto out = backend_->reset(u);
    if (std::abs(out.width - episode_.width_target) < episode_.min_width_error &&
        std::abs(out.thickness - episode_.thickness_target) < episode_.min_thickness_error) {
      continue;
    }
    set_ = u;
    observe(out);
    for (std::size_t i = 0; i < kObjectives; ++i) {
      auto& o = objectives_[i];
      o.prev_control = o.control;
      o.best_error = o.error;
      error_history_[i].assign(episode_.history, o.signed_error());
      delta_error_[i] = 0.0;
    }
    steps_ = 0;
    active_ = true;
    return build_state();
  }
  throw std::runtime_error("environment reset: could not draw initial set-points away from the targets");
}

StepResult Environment::step(std::span<const double> action) {
  if (!backend_) throw std::logic_error("environment: forecaster not loaded");
  if (!active_) throw std::logic_error("environment: step() called before reset() or after the episode ended");
  if (action.size() != 3) {
    throw std::invalid_argument("environment step: expected 3 action values, got " + std::to_string(action.size()));
  }
  StepInfo info;
  for (double a : action) {
    if (!std::isfinite(a)) throw std::invalid_argument("environment step: non-finite action");
    info.action.push_back(std::clamp(a, -1.0, 1.0));
  }
  std::array<double, kObjectives> prev_signed{};
  for (std::size_t i = 0; i < kObjectives; ++i) {
    prev_signed[i] = objectives_[i].signed_error();
    objectives_[i].prev_control = objectives_[i].control;
  }
  set_.knife = params_.knife_bounds.clamp(set_.knife + info.action[0] * episode_.knife_scale);
  set_.ds_gap = params_.gap_bounds.clamp(set_.ds_gap + info.action[1] * episode_.gap_scale);
  set_.os_gap = params_.gap_bounds.clamp(set_.os_gap + info.action[2] * episode_.gap_scale);
  observe(backend_->step(set_));
  ++steps_;

  for (std::size_t i = 0; i < kObjectives; ++i) {
    auto& o = objectives_[i];
    delta_error_[i] = o.signed_error() - prev_signed[i];
    info.components[i] = reward_components(o, reward_);
    o.best_error = std::min(o.best_error, o.error);
    auto& h = error_history_[i];
    if (!h.empty()) {
      h.pop_back();
      h.insert(h.begin(), prev_signed[i]);
    }
  }
  info.width = objectives_[0].value;
  info.thickness = objectives_[1].value;
  info.width_error = objectives_[0].value - objectives_[0].target;
  info.thickness_error = objectives_[1].value - objectives_[1].target;
  info.set = set_;
  info.reward = total_reward(info.components, reward_);
  // Boundary counts as achieved.
  info.success = std::abs(info.width_error) <= episode_.width_tolerance &&
                 std::abs(info.thickness_error) <= episode_.thickness_tolerance;
  info.done = info.success || steps_ >= episode_.max_steps;
  active_ = !info.done;
  return {build_state(), info.reward, info.done, std::move(info)};
}

std::vector<double> Environment::build_state() const {
  std::vector<double> s;
  s.reserve(state_dim());
  const auto& kb = params_.knife_bounds;
  const auto& gb = params_.gap_bounds;
  const std::array<double, kObjectives> target_pos{(nominal_.knife - kb.lo) / kb.span(),
                                                   (nominal_.mean_gap() - gb.lo) / gb.span()};
  for (std::size_t i = 0; i < kObjectives; ++i) {
    s.push_back(objectives_[i].signed_error());
    s.push_back(delta_error_[i]);
    s.push_back(target_pos[i]);
    s.insert(s.end(), error_history_[i].begin(), error_history_[i].end());
  }
  s.push_back((set_.knife - kb.lo) / kb.span());
  s.push_back((set_.ds_gap - gb.lo) / gb.span());
  s.push_back((set_.os_gap - gb.lo) / gb.span());
  return s;
}

// ---------------------------------------------------------------------------

EpisodeSummary run_episode(Environment& env, const PolicyFn& policy, bool keep_trace) {
  EpisodeSummary ep;
  auto state = env.reset();
  while (true) {
    auto r = env.step(policy(state));
    ep.total_reward += r.reward;
    ep.width_error = r.info.width_error;
    ep.thickness_error = r.info.thickness_error;
    ep.success = r.info.success;
    if (keep_trace) ep.trace.push_back(r.info);
    if (r.done) break;
    state = std::move(r.state);
  }
  ep.optimize_step = ep.success ? env.steps() : env.episode_config().max_steps;
  return ep;
}

EpisodeSummary oracle_eval(const PolicyFn& policy, const plant::PlantParams& params, const EpisodeConfig& episode,
                           const RewardConfig& reward, std::uint64_t seed, bool keep_trace) {
  // Distinct streams for the initial draw and the plant noise.
  std::seed_seq seq{seed, std::uint64_t{0x9e3779b97f4a7c15ULL}};
  std::array<std::uint64_t, 2> seeds{};
  seq.generate(seeds.begin(), seeds.end());
  Environment env(episode, reward, params, std::make_unique<PlantBackend>(params, seeds[1]), seeds[0]);
  return run_episode(env, policy, keep_trace);
}

void write_trace_csv(const std::filesystem::path& path, const EpisodeSummary& ep, const EpisodeConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,width,thickness,width_target,thickness_target,a_knife,a_ds,a_os,knife,ds_gap,os_gap,"
         "w_error,w_progress,w_action,w_steady,h_error,h_progress,h_action,h_steady,reward,done\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < ep.trace.size(); ++i) {
    const auto& s = ep.trace[i];
    out << i + 1 << ',' << s.width << ',' << s.thickness << ',' << cfg.width_target << ',' << cfg.thickness_target;
    for (double a : s.action) out << ',' << a;
    out << ',' << s.set.knife << ',' << s.set.ds_gap << ',' << s.set.os_gap;
    for (const auto& c : s.components) out << ',' << c.error << ',' << c.progress << ',' << c.action << ',' << c.steady;
    out << ',' << s.reward << ',' << (s.done ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mpd::env
