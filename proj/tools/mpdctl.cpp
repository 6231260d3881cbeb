// Command-line driver for the forecaster, agent training and experiment grid.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mpd/bench/config.hpp"
#include "mpd/bench/experiment.hpp"
#include "mpd/bench/report.hpp"

namespace fs = std::filesystem;
using namespace mpd;

namespace {

struct Common {
  std::string config;
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  std::vector<std::string> scenarios;
  bool resume = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool multi) {
  cmd->add_option("--config", c.config, "YAML configuration file (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
  if (multi) {
    cmd->add_option("--seed", c.seeds, "Seed(s); defaults to the configured seed list");
    cmd->add_option("--variant", c.variants, "Variant(s); defaults to the configured list");
    cmd->add_option("--scenario", c.scenarios, "Scenario(s) as WIDTH/THICKNESS/STEPS");
    cmd->add_flag("--resume", c.resume, "Reuse cells that already have a record.json");
  }
}

bench::Config load(const Common& c) { return c.config.empty() ? bench::parse_config("") : bench::load_config(c.config); }

std::ostream* log_of(const Common& c) { return c.quiet ? nullptr : &std::cerr; }

bench::GridSelection selection(const Common& c) {
  bench::GridSelection s;
  s.variants = c.variants;
  s.seeds = c.seeds;
  s.resume = c.resume;
  for (const auto& t : c.scenarios) s.scenarios.push_back(bench::Scenario::parse(t));
  return s;
}

std::optional<bench::ForecasterBundle> forecasters_for(const bench::Config& cfg, const Common& c) {
  if (cfg.experiment.environment == "plant") return std::nullopt;
  return bench::ensure_forecasters(cfg, c.out_dir, log_of(c));
}

int emit(const bench::Config& cfg, const fs::path& out_dir) {
  const auto records = bench::load_records(out_dir);
  if (records.empty()) {
    std::cerr << "no run records under " << (out_dir / "runs").string() << '\n';
    return 1;
  }
  const auto verdicts = bench::write_tables(records, cfg.experiment.ablation_scenario(), out_dir);
  const auto plots = bench::write_plots(records, cfg.episode, out_dir);
  std::cout << "wrote " << (out_dir / "aggregate").string() << " and " << plots.size() << " plots\n";
  for (const auto& v : verdicts) std::cout << "table " << v.table << ": " << v.check << ": " << v.verdict << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecaster-backed multi-branch PPO experiments on a synthetic calendering plant"};
  app.require_subcommand(1);

  Common c;
  std::uint64_t seed = 0;
  std::string variant = ppo::kVariantMpdPpo;
  std::string scenario;
  std::size_t episodes = 0;
  bool seed_given = false;

  auto* tf = app.add_subcommand("train-forecaster", "Generate plant data, train both forecasters and the baselines");
  add_common(tf, c, false);
  tf->add_option("--seed", seed, "Forecaster seed (defaults to experiment.forecaster_seed)")
      ->each([&](const std::string&) { seed_given = true; });

  auto* ta = app.add_subcommand("train-agent", "Train and evaluate one agent (one grid cell)");
  add_common(ta, c, false);
  ta->add_option("--seed", seed, "Run seed")->capture_default_str();
  ta->add_option("--variant", variant, "Agent/reward variant")->capture_default_str();
  ta->add_option("--scenario", scenario, "WIDTH/THICKNESS/STEPS (defaults to the ablation scenario)");

  auto* rg = app.add_subcommand("run-grid", "Train every variant x scenario x seed of the grid, then aggregate");
  add_common(rg, c, true);
  auto* ra = app.add_subcommand("run-ablations", "Train the ablation variants at the ablation scenario, then aggregate");
  add_common(ra, c, true);

  auto* ev = app.add_subcommand("evaluate", "Greedy evaluation of a trained cell on the surrogate and on the plant");
  add_common(ev, c, false);
  ev->add_option("--seed", seed, "Run seed of the cell")->capture_default_str();
  ev->add_option("--variant", variant, "Variant of the cell")->capture_default_str();
  ev->add_option("--scenario", scenario, "WIDTH/THICKNESS/STEPS (defaults to the ablation scenario)");
  ev->add_option("--episodes", episodes, "Evaluation episodes (defaults to experiment.eval_episodes)");

  auto* ep = app.add_subcommand("emit-plots", "Rebuild aggregate tables and plots from persisted run records");
  add_common(ep, c, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(c);
    const fs::path out_dir = c.out_dir;

    if (*tf) {
      const auto s = seed_given ? seed : cfg.experiment.forecaster_seed;
      const auto bundle = bench::train_forecasters(cfg, s, out_dir, log_of(c));
      for (const char* target : {"width", "thickness"}) {
        const auto& m = bundle.metrics.at(target);
        std::cout << target << ": lstnet mae " << m.at("lstnet").at("mae").get<double>() << " qr "
                  << m.at("lstnet").at("qualification_rate").get<double>() << ", linreg mae "
                  << m.at("linreg").at("mae").get<double>() << " qr "
                  << m.at("linreg").at("qualification_rate").get<double>() << '\n';
      }
      std::cout << "saved to " << bench::forecaster_dir(out_dir, s).string() << '\n';
      return 0;
    }

    const auto sc = scenario.empty() ? cfg.experiment.ablation_scenario() : bench::Scenario::parse(scenario);

    if (*ta) {
      const auto bundle = forecasters_for(cfg, c);
      const auto rec = bench::run_cell(cfg, variant, sc, seed, bundle ? &*bundle : nullptr, out_dir, log_of(c));
      std::cout << variant << ' ' << sc.name() << " seed " << seed << ": average optimize step "
                << rec.average_optimize_step << ", success rate " << rec.success_rate << '\n';
      if (rec.failed) std::cout << "run failed: " << rec.error << '\n';
      return rec.failed ? 1 : 0;
    }

    if (*rg || *ra) {
      const auto bundle = forecasters_for(cfg, c);
      const auto* b = bundle ? &*bundle : nullptr;
      const auto sel = selection(c);
      const auto records = *rg ? bench::run_grid(cfg, b, out_dir, sel, log_of(c))
                               : bench::run_ablations(cfg, b, out_dir, sel, log_of(c));
      std::size_t failed = 0;
      for (const auto& r : records) failed += r.failed ? 1 : 0;
      std::cout << records.size() << " runs, " << failed << " failed\n";
      return emit(cfg, out_dir);
    }

    if (*ev) {
      const auto dir = bench::cell_dir(out_dir, variant, sc, seed);
      const auto agent = ppo::Agent::load(dir / "checkpoint.json");
      auto reward = cfg.reward;
      auto agent_cfg = cfg.agent;
      ppo::apply_variant(variant, agent_cfg, reward);
      const auto n = episodes ? episodes : cfg.experiment.eval_episodes;
      const auto bundle = forecasters_for(cfg, c);
      auto env = bench::make_environment(cfg, sc, reward, bundle ? &*bundle : nullptr,
                                         bench::derive_seed(cfg.experiment.seed_base, 4, sc.name()));
      const auto eps = ppo::evaluate(*env, *agent, n);
      std::cout << cfg.experiment.environment << " environment: mean optimize step " << ppo::mean_optimize_step(eps)
                << " over " << n << " episodes\n";

      auto episode = env->episode_config();
      const env::PolicyFn policy = [&](std::span<const double> s) { return agent->greedy(s); };
      std::vector<env::EpisodeSummary> plant_eps;
      for (std::size_t i = 0; i < n; ++i) {
        plant_eps.push_back(env::oracle_eval(policy, cfg.plant, episode, reward,
                                             bench::derive_seed(cfg.experiment.seed_base, 5 + i, sc.name())));
      }
      std::cout << "plant: mean optimize step " << ppo::mean_optimize_step(plant_eps) << " over " << n
                << " episodes\n";
      return 0;
    }

    if (*ep) return emit(cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
