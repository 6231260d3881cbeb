#include "mpd/bench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mpd/plant/plant.hpp"

namespace fs = std::filesystem;

namespace mpd::bench {

namespace {

nlohmann::json metrics_json(const forecast::ForecastMetrics& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"qualification_rate", m.qualification_rate}};
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

ForecasterFit fit_forecaster(const Config& cfg, const forecast::FeatureSpec& spec, const plant::Series& series,
                   std::uint64_t seed, std::ostream* log) {
  const auto data = forecast::prepare(series, spec, cfg.forecaster.window, cfg.data.split);
  std::mt19937_64 rng(seed);
  auto on_epoch = [&](const forecast::EpochStats& e) {
    if (log) {
      *log << "  " << spec.name << " epoch " << e.epoch << " train_mae(norm) " << e.train_mae << " val_mae "
           << e.val_mae << '\n'
           << std::flush;
    }
  };
  auto result = forecast::train_forecaster(cfg.forecaster, spec, data, rng, on_epoch);
  const auto lr_last = forecast::linreg_baseline(data, spec.tolerance, forecast::LinRegInputs::last_step);
  const auto lr_mean = forecast::linreg_baseline(data, spec.tolerance, forecast::LinRegInputs::window_mean);
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch}, {"train_mae_normalized", e.train_mae}, {"val_mae", e.val_mae}});
  }
  nlohmann::json m = {{"tolerance", spec.tolerance},
                      {"lstnet", metrics_json(result.test)},
                      {"linreg", metrics_json(lr_last.test)},
                      {"linreg_window_mean", metrics_json(lr_mean.test)},
                      {"best_epoch", result.best_epoch},
                      {"test_rows", data.test.size()},
                      {"history", history}};
  return {std::make_shared<const forecast::Forecaster>(std::move(result.model)), m};
}

plant::Series generate_series(const Config& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 10));
  return plant::generate_dataset(cfg.plant, cfg.data.steps, cfg.data.excitation, rng, cfg.forecaster.window + 1);
}

fs::path forecaster_dir(const fs::path& out_dir, std::uint64_t seed) {
  return out_dir / "forecasters" / ("seed-" + std::to_string(seed));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(base);
  mix(stream);
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer spreads the FNV state over all bits.
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

ForecasterBundle train_forecasters(const Config& cfg, std::uint64_t seed, const fs::path& out_dir, std::ostream* log) {
  const auto dir = forecaster_dir(out_dir, seed);
  fs::create_directories(dir);
  if (log) *log << "generating " << cfg.data.steps << " plant steps\n" << std::flush;
  const auto series = generate_series(cfg, seed);
  plant::write_series_csv(dir / "data.csv", series);

  if (log) *log << "training width forecaster\n" << std::flush;
  auto w = fit_forecaster(cfg, forecast::width_spec(), series, derive_seed(seed, 11), log);
  if (log) *log << "training thickness forecaster\n" << std::flush;
  auto h = fit_forecaster(cfg, forecast::thickness_spec(), series, derive_seed(seed, 12), log);
  w.model->save(dir / "width.json");
  h.model->save(dir / "thickness.json");

  ForecasterBundle bundle;
  bundle.width = w.model;
  bundle.thickness = h.model;
  bundle.metrics = {{"seed", seed},
                    {"data_steps", cfg.data.steps},
                    {"forecaster", cfg.forecaster.to_json()},
                    {"width", w.metrics},
                    {"thickness", h.metrics}};
  write_json(dir / "metrics.json", bundle.metrics);
  return bundle;
}

ForecasterBundle load_forecasters(const fs::path& out_dir, std::uint64_t seed) {
  const auto dir = forecaster_dir(out_dir, seed);
  for (const char* f : {"width.json", "thickness.json", "metrics.json"}) {
    if (!fs::exists(dir / f)) throw std::runtime_error("missing " + (dir / f).string() + "; run train-forecaster first");
  }
  ForecasterBundle bundle;
  bundle.width = std::make_shared<const forecast::Forecaster>(forecast::Forecaster::load(dir / "width.json"));
  bundle.thickness = std::make_shared<const forecast::Forecaster>(forecast::Forecaster::load(dir / "thickness.json"));
  bundle.metrics = read_json(dir / "metrics.json");
  return bundle;
}

ForecasterBundle ensure_forecasters(const Config& cfg, const fs::path& out_dir, std::ostream* log) {
  const auto seed = cfg.experiment.forecaster_seed;
  const auto dir = forecaster_dir(out_dir, seed);
  if (fs::exists(dir / "width.json") && fs::exists(dir / "thickness.json") && fs::exists(dir / "metrics.json")) {
    return load_forecasters(out_dir, seed);
  }
  return train_forecasters(cfg, seed, out_dir, log);
}

std::unique_ptr<env::Environment> make_environment(const Config& cfg, const Scenario& scenario,
                                                   const env::RewardConfig& reward, const ForecasterBundle* bundle,
                                                   std::uint64_t seed) {
  auto episode = cfg.episode;
  episode.width_target = scenario.width;
  episode.thickness_target = scenario.thickness;
  episode.max_steps = scenario.steps;
  std::unique_ptr<env::Backend> backend;
  if (cfg.experiment.environment == "plant") {
    backend = std::make_unique<env::PlantBackend>(cfg.plant, derive_seed(seed, 20));
  } else {
    if (!bundle || !bundle->width || !bundle->thickness) {
      throw std::invalid_argument("make_environment: the surrogate environment needs trained forecasters");
    }
    backend = std::make_unique<env::SurrogateBackend>(bundle->width, bundle->thickness, cfg.plant);
  }
  return std::make_unique<env::Environment>(episode, reward, cfg.plant, std::move(backend), seed);
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& e : r.curve) {
    curve.push_back({{"episode", e.episode},
                     {"total_reward", e.total_reward},
                     {"optimize_step", e.optimize_step},
                     {"width_error", e.width_error},
                     {"thickness_error", e.thickness_error},
                     {"success", e.success}});
  }
  return {{"variant", r.variant},
          {"scenario", {{"name", r.scenario.name()},
                        {"width", r.scenario.width},
                        {"thickness", r.scenario.thickness},
                        {"steps", r.scenario.steps}}},
          {"seed", r.seed},
          {"failed", r.failed},
          {"error", r.error},
          {"average_optimize_step", r.average_optimize_step},
          {"success_rate", r.success_rate},
          {"eval_steps", r.eval_steps},
          {"trace_width", r.trace_width},
          {"trace_thickness", r.trace_thickness},
          {"curve", curve}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.variant = j.at("variant").get<std::string>();
    const auto& s = j.at("scenario");
    r.scenario = {s.at("width").get<double>(), s.at("thickness").get<double>(), s.at("steps").get<std::size_t>()};
    r.seed = j.at("seed").get<std::uint64_t>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.average_optimize_step = j.at("average_optimize_step").get<double>();
    r.success_rate = j.at("success_rate").get<double>();
    r.eval_steps = j.at("eval_steps").get<std::vector<std::size_t>>();
    r.trace_width = j.at("trace_width").get<std::vector<double>>();
    r.trace_thickness = j.at("trace_thickness").get<std::vector<double>>();
    for (const auto& e : j.at("curve")) {
      ppo::EpisodeRecord rec;
      rec.episode = e.at("episode").get<std::size_t>();
      rec.total_reward = e.at("total_reward").get<double>();
      rec.optimize_step = e.at("optimize_step").get<std::size_t>();
      rec.width_error = e.at("width_error").get<double>();
      rec.thickness_error = e.at("thickness_error").get<double>();
      rec.success = e.at("success").get<bool>();
      r.curve.push_back(rec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed run record: ") + e.what());
  }
  return r;
}

fs::path cell_dir(const fs::path& out_dir, const std::string& variant, const Scenario& scenario, std::uint64_t seed) {
  return out_dir / "runs" / variant / scenario.name() / ("seed-" + std::to_string(seed));
}

RunRecord run_cell(const Config& cfg, const std::string& variant, const Scenario& scenario, std::uint64_t seed,
                   const ForecasterBundle* bundle, const fs::path& out_dir, std::ostream* log) {
  const auto dir = cell_dir(out_dir, variant, scenario, seed);
  fs::create_directories(dir);
  const auto label = scenario.name();
  const auto t0 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.variant = variant;
  rec.scenario = scenario;
  rec.seed = seed;
  try {
    auto agent_cfg = cfg.agent;
    auto reward = cfg.reward;
    ppo::apply_variant(variant, agent_cfg, reward);
    auto train_env = make_environment(cfg, scenario, reward, bundle, derive_seed(seed, 1, label));
    ppo::Agent agent(agent_cfg, derive_seed(seed, 2, label));
    std::mt19937_64 rng(derive_seed(seed, 3, label));

    ppo::TrainOptions options;
    options.episodes = cfg.experiment.episodes;
    options.on_episode = [&](const ppo::EpisodeRecord& e, const ppo::UpdateStats*) {
      if (log && (e.episode % 10 == 0 || e.episode == options.episodes)) {
        *log << "  " << variant << ' ' << label << " seed " << seed << " episode " << e.episode << " optimize_step "
             << e.optimize_step << " reward " << e.total_reward << '\n'
             << std::flush;
      }
    };
    auto trained = ppo::train(*train_env, agent, options, rng);
    rec.curve = trained.curve;
    ppo::write_curve_csv(dir / "curve.csv", seed, trained.curve);

    const nlohmann::json meta = {{"variant", variant}, {"scenario", label}, {"seed", seed}};
    agent.save(dir / "checkpoint.json", meta);
    if (!trained.best_parameters.empty()) {
      const auto final_params = agent.snapshot();
      agent.restore(trained.best_parameters);
      auto best_meta = meta;
      best_meta["best_episode"] = trained.best_episode;
      best_meta["best_window_mean"] = trained.best_window_mean;
      agent.save(dir / "checkpoint_best.json", best_meta);
      agent.restore(final_params);
    }

    // The evaluation environment depends on the scenario only, so every seed
    // and variant faces the same initial conditions.
    auto eval_env = make_environment(cfg, scenario, reward, bundle, derive_seed(cfg.experiment.seed_base, 4, label));
    const auto episodes = ppo::evaluate(*eval_env, agent, cfg.experiment.eval_episodes, true);
    std::size_t successes = 0;
    for (const auto& e : episodes) {
      rec.eval_steps.push_back(e.optimize_step);
      successes += e.success ? 1 : 0;
    }
    rec.average_optimize_step = ppo::mean_optimize_step(episodes);
    rec.success_rate = static_cast<double>(successes) / static_cast<double>(episodes.size());
    for (const auto& s : episodes.front().trace) {
      rec.trace_width.push_back(s.width);
      rec.trace_thickness.push_back(s.thickness);
    }
    env::write_trace_csv(dir / "trace.csv", episodes.front(), eval_env->episode_config());
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.average_optimize_step = static_cast<double>(scenario.steps);
    rec.success_rate = 0.0;
    if (log) *log << "  run failed: " << e.what() << '\n' << std::flush;
  }
  write_json(dir / "record.json", to_json(rec));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(dir / "timing.json", {{"seconds", seconds}});
  if (log) {
    *log << variant << ' ' << label << " seed " << seed << ": average optimize step " << rec.average_optimize_step
         << (rec.failed ? " (failed)" : "") << " in " << std::fixed << std::setprecision(1) << seconds << " s\n"
         << std::defaultfloat << std::flush;
  }
  return rec;
}

namespace {

std::vector<RunRecord> run_cells(const Config& cfg, const ForecasterBundle* bundle, const fs::path& out_dir,
                                 const std::vector<std::string>& variants, const std::vector<Scenario>& scenarios,
                                 const std::vector<std::uint64_t>& seeds, bool resume, std::ostream* log) {
  std::vector<RunRecord> out;
  for (const auto& v : variants)
    for (const auto& s : scenarios)
      for (auto seed : seeds) {
        const auto existing = cell_dir(out_dir, v, s, seed) / "record.json";
        if (resume && fs::exists(existing)) {
          out.push_back(run_record_from_json(read_json(existing)));
          if (log) *log << v << ' ' << s.name() << " seed " << seed << ": reused\n" << std::flush;
          continue;
        }
        out.push_back(run_cell(cfg, v, s, seed, bundle, out_dir, log));
      }
  return out;
}

}  // namespace

std::vector<RunRecord> run_grid(const Config& cfg, const ForecasterBundle* bundle, const fs::path& out_dir,
                                const GridSelection& selection, std::ostream* log) {
  return run_cells(cfg, bundle, out_dir,
                   selection.variants.empty() ? cfg.experiment.grid_variants : selection.variants,
                   selection.scenarios.empty() ? cfg.experiment.grid_scenarios() : selection.scenarios,
                   selection.seeds.empty() ? cfg.experiment.seed_list() : selection.seeds, selection.resume, log);
}

std::vector<RunRecord> run_ablations(const Config& cfg, const ForecasterBundle* bundle, const fs::path& out_dir,
                                     const GridSelection& selection, std::ostream* log) {
  return run_cells(cfg, bundle, out_dir,
                   selection.variants.empty() ? cfg.experiment.ablation_variants : selection.variants,
                   selection.scenarios.empty() ? std::vector<Scenario>{cfg.experiment.ablation_scenario()}
                                               : selection.scenarios,
                   selection.seeds.empty() ? cfg.experiment.seed_list() : selection.seeds, selection.resume, log);
}

std::vector<RunRecord> load_records(const fs::path& out_dir) {
  std::vector<fs::path> paths;
  const auto root = out_dir / "runs";
  if (!fs::exists(root)) return {};
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "record.json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> out;
  for (const auto& p : paths) out.push_back(run_record_from_json(read_json(p)));
  return out;
}

}  // namespace mpd::bench
