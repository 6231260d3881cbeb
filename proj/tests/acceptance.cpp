// End-to-end acceptance run. Prints one PASS/FAIL line per criterion; every
// tolerance is pinned below. Criterion 7 compares means of different agent
// configurations on the synthetic plant and is reported without affecting
// the exit status (see README, "Known results").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "mpd/bench/config.hpp"
#include "mpd/bench/experiment.hpp"
#include "mpd/bench/report.hpp"
#include "mpd/diff/ops.hpp"
#include "mpd/diff/rnn.hpp"
#include "mpd/env/reward.hpp"
#include "mpd/forecast/model.hpp"
#include "mpd/neuro/gaussian.hpp"
#include "mpd/ppo/advantage.hpp"
#include "support/gradcheck.hpp"

using namespace mpd;
using diff::Tensor;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;            // criterion 1, relative error
constexpr double kFiniteDiffStep = 1e-5;     // criterion 1
constexpr std::size_t kMinGradConfigs = 100; // criterion 1
constexpr double kClosedFormTol = 1e-9;      // criterion 2
constexpr double kGaeOracleTol = 1e-10;      // criterion 3
constexpr std::size_t kGaeEpisodes = 1000;   // criterion 3
constexpr double kTransplantTol = 1e-12;     // criterion 3
constexpr double kClipRatio = 1.15;          // criterion 4
constexpr std::size_t kForecastSeeds = 5;    // criterion 5
constexpr std::size_t kForecastWins = 4;     // criterion 5
constexpr double kConvergedSteps = 40.0;     // criterion 6

struct Outcome {
  bool pass = false;
  std::string detail;
};

Tensor random_tensor(diff::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.mutable_values()) v = d(rng);
  return t;
}

// ---------------------------------------------------------------- criterion 1

Outcome gradients() {
  std::size_t configs = 0;
  double worst = 0.0;
  std::string where;
  auto record = [&](const testing::GradCheckResult& r, const std::string& what) {
    ++configs;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = what + " " + r.worst;
    }
  };
  using namespace diff;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t rows = 1 + seed % 3, cols = 2 + seed % 4;
    auto a = random_tensor({rows, cols}, rng);
    auto b = random_tensor({rows, cols}, rng, 0.5, 1.5);
    auto w = random_tensor({cols, 3}, rng);
    auto bias = random_tensor({3}, rng);
    auto row = random_tensor({cols}, rng);
    auto s = random_tensor({1}, rng);
    record(testing::grad_check(
               [&](Tape& t) {
                 auto u = add(t, mul(t, a, b), broadcast_rows(t, row, rows));
                 u = sub(t, u, div(t, a, b));
                 u = maximum(t, sigmoid(t, u), scale(t, tanh(t, a), 0.5));
                 u = minimum(t, u, exp(t, neg(t, square(t, b))));
                 u = clip(t, add_scalar(t, mul(t, u, s), 0.1), -0.4, 0.6);
                 auto v = relu(t, linear(t, add(t, u, a), w, bias));
                 auto both = concat_cols(t, {v, slice_cols(t, u, 0, 1)});
                 return add(t, mean(t, sum_cols(t, both)), sum(t, reshape(t, square(t, v), {v.numel()})));
               },
               {a, b, w, bias, row, s}, kFiniteDiffStep),
           "composition seed " + std::to_string(seed));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const std::size_t stride = 1 + seed % 2;
    auto x = random_tensor({2, 9, 2}, rng);
    auto k = random_tensor({3, 2, 3}, rng);
    auto cb = random_tensor({3}, rng);
    record(testing::grad_check([&](Tape& t) { return sum(t, tanh(t, conv1d(t, x, k, cb, stride))); }, {x, k, cb},
                               kFiniteDiffStep),
           "conv1d");
    auto px = random_tensor({2, 8, 3}, rng);
    auto pw = random_tensor({2, 4, 3}, rng);
    record(testing::grad_check([&](Tape& t) { return sum(t, mul(t, pw, max_pool1d(t, px, 2))); }, {px, pw},
                               kFiniteDiffStep),
           "max_pool1d");
    auto lx = random_tensor({3, 5}, rng, -2, 2);
    auto lg = random_tensor({5}, rng, 0.5, 1.5);
    auto lb = random_tensor({5}, rng);
    auto lw = random_tensor({3, 5}, rng);
    record(testing::grad_check([&](Tape& t) { return sum(t, mul(t, lw, layer_norm(t, lx, lg, lb))); }, {lx, lg, lb},
                               kFiniteDiffStep),
           "layer_norm");
    auto lp = LstmParams::init(3, 4, rng);
    auto x3 = random_tensor({2, 3}, rng);
    auto h4 = random_tensor({2, 4}, rng);
    auto c4 = random_tensor({2, 4}, rng);
    auto w4 = random_tensor({2, 4}, rng);
    record(testing::grad_check(
               [&](Tape& t) {
                 auto st = lstm_cell(t, x3, h4, c4, lp);
                 return add(t, sum(t, mul(t, w4, st.h)), sum(t, st.c));
               },
               {lp.w_input, lp.w_hidden, lp.bias, x3, h4, c4}, kFiniteDiffStep),
           "lstm_cell");
    auto gp = GruParams::init(3, 4, rng);
    record(testing::grad_check([&](Tape& t) { return sum(t, mul(t, w4, gru_cell(t, x3, h4, gp))); },
                               {gp.w_input, gp.w_hidden, gp.bias_input, gp.bias_hidden, x3, h4}, kFiniteDiffStep),
           "gru_cell");
  }
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    forecast::ForecasterConfig c;
    c.window = 8;
    c.conv_kernel = 3;
    c.conv_channels = 4;
    c.pool = 2;
    c.lstm_hidden = 3;
    c.skip_hidden = 2;
    c.skip_period = 2;
    c.dropout = 0.0;
    c.fusion_hidden = 3;
    c.highway_window = 2;
    forecast::LstNet net(c, 3, rng);
    Tensor hw = net.parameters().at("highway.weight");
    for (auto& v : hw.mutable_values()) v = 0.1;
    auto x = random_tensor({2, 8, 3}, rng);
    auto w = random_tensor({2, 1}, rng);
    record(testing::grad_check([&](Tape& t) { return sum(t, mul(t, net.forward(t, x, false, nullptr), w)); },
                               net.parameters().tensors(), kFiniteDiffStep),
           "lstnet");

    neuro::PolicyConfig pc;
    pc.state_dim = 4;
    pc.trunk_sizes = {5};
    for (auto& b : pc.branches) b.hidden_sizes = {3};
    neuro::PolicyNetwork policy(pc, rng);
    auto states = random_tensor({3, 4}, rng);
    auto act_w = random_tensor({3, 1}, rng);
    auto act_h = random_tensor({3, 2}, rng);
    record(testing::grad_check(
               [&](Tape& t) {
                 auto out = policy.forward(t, states);
                 auto lw = neuro::gaussian_log_prob(t, out.means[0], out.log_stds[0], act_w);
                 auto lh = neuro::gaussian_log_prob(t, out.means[1], out.log_stds[1], act_h);
                 auto ent = add(t, neuro::gaussian_entropy(t, out.log_stds[0]),
                                neuro::gaussian_entropy(t, out.log_stds[1]));
                 return add(t, add(t, mean(t, lw), mean(t, lh)), scale(t, ent, 0.1));
               },
               policy.parameters().tensors(), kFiniteDiffStep),
           "policy");

    neuro::CriticNetwork critic({4, {5, 3}, 2}, rng);
    auto targets = random_tensor({3, 2}, rng);
    record(testing::grad_check(
               [&](Tape& t) { return mean(t, square(t, sub(t, critic.forward(t, states), targets))); },
               critic.parameters().tensors(), kFiniteDiffStep),
           "critic");
  }
  std::ostringstream d;
  d << configs << " configurations, worst relative error " << worst;
  if (worst >= kGradTol) d << " at " << where;
  return {configs >= kMinGradConfigs && worst < kGradTol, d.str()};
}

// ---------------------------------------------------------------- criterion 2

Outcome closed_forms() {
  std::vector<std::string> failures;
  std::size_t checked = 0;
  auto expect = [&](const std::string& what, double got, double want) {
    ++checked;
    if (!(std::abs(got - want) <= kClosedFormTol)) {
      std::ostringstream s;
      s << what << " got " << got << " want " << want;
      failures.push_back(s.str());
    }
  };
  const double zero[] = {0.0}, one[] = {1.0};
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  expect("log_prob N(0,1) at 0", neuro::log_prob(zero, one, zero), -half_log_2pi);
  expect("log_prob N(0,1) at 1", neuro::log_prob(zero, one, one), -half_log_2pi - 0.5);
  expect("entropy sigma 1", neuro::entropy(std::vector<double>{1.0}), 0.5 * std::log(2.0 * M_PI * std::exp(1.0)));
  expect("entropy sigma 0.5 x2", neuro::entropy(std::vector<double>{0.5, 0.5}),
         2.0 * (0.5 * std::log(2.0 * M_PI * std::exp(1.0)) + std::log(0.5)));

  env::RewardConfig rc;
  auto obj = [](double e, double best, std::vector<double> u = {0.0}, std::vector<double> prev = {0.0}) {
    env::ObjectiveState o;
    o.error = e;
    o.best_error = best;
    o.control = std::move(u);
    o.prev_control = std::move(prev);
    return o;
  };
  expect("R_e at e=0", env::reward_components(obj(0.0, 0.0), rc).error, 2.0);
  expect("R_e at e=1", env::reward_components(obj(1.0, 1.0), rc).error, 2.0 * std::exp(-1.0));
  expect("R_p from 3 to 2", env::reward_components(obj(2.0, 3.0), rc).progress, 0.3 * std::tanh(1.0));
  expect("R_p without progress", env::reward_components(obj(1.0, 1.0), rc).progress, 0.0);
  expect("P_a", env::reward_components(obj(1.0, 1.0, {1.5, -0.5}, {0.5, 0.5}), rc).action, -0.1);
  expect("R_s at e=0.5", env::reward_components(obj(0.5, 0.5), rc).steady, 0.25);

  const std::vector<double> r{1, 1, 1};
  const bool d3[] = {false, false, true};
  const auto g = ppo::discounted_returns(r, d3, 0.9);
  expect("returns[0]", g[0], 2.71);
  expect("returns[1]", g[1], 1.9);
  expect("returns[2]", g[2], 1.0);
  const bool d2[] = {true, true};
  const auto g2 = ppo::discounted_returns(std::vector<double>{1, 1}, d2, 0.9);
  expect("returns reset", g2[1], 1.0);
  const bool dg[] = {false, true};
  const auto gae = ppo::gae_advantages(std::vector<double>{1, 1}, std::vector<double>{0.5, 0.5}, dg, 0.9, 0.95);
  expect("GAE A[0]", gae.advantages[0], 1.3775);
  expect("GAE A[1]", gae.advantages[1], 0.5);
  const auto z = ppo::standardize(std::vector<double>{1, 2, 3});
  expect("standardize[0]", z[0], -1.0 / (std::sqrt(2.0 / 3.0) + 1e-8));
  expect("standardize[1]", z[1], 0.0);
  expect("surrogate 1.5,2,0.2", ppo::clipped_surrogate(1.5, 2.0, 0.2), 2.4);
  expect("surrogate 1,A", ppo::clipped_surrogate(1.0, -3.7, 0.1), -3.7);
  expect("surrogate 0.5,-1,0.2", ppo::clipped_surrogate(0.5, -1.0, 0.2), -0.8);

  std::ostringstream d;
  d << checked << " closed-form values";
  for (const auto& f : failures) d << "; " << f;
  return {failures.empty(), d.str()};
}

// ---------------------------------------------------------------- criterion 3

Outcome oracle_equivalences() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::bernoulli_distribution end(0.1);
  std::uniform_int_distribution<std::size_t> len(1, 40);
  double worst_gae = 0.0;
  for (std::size_t ep = 0; ep < kGaeEpisodes; ++ep) {
    const std::size_t n = len(rng);
    std::vector<double> r(n);
    for (auto& x : r) x = u(rng);
    std::vector<char> done(n);
    for (auto& x : done) x = end(rng);
    done.back() = 1;
    const std::span<const bool> d(reinterpret_cast<const bool*>(done.data()), n);
    const auto g = ppo::discounted_returns(r, d, 0.93);
    const auto a = ppo::gae_advantages(r, std::vector<double>(n, 0.0), d, 0.93, 1.0);
    for (std::size_t i = 0; i < n; ++i) worst_gae = std::max(worst_gae, std::abs(a.advantages[i] - g[i]));
  }

  double worst_gru = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 r2(300 + seed);
    forecast::ForecasterConfig c;
    c.window = 8;
    c.conv_kernel = 3;
    c.conv_channels = 4;
    c.pool = 2;
    c.lstm_hidden = 3;
    c.skip_hidden = 2;
    c.skip_period = 1;
    c.dropout = 0.0;
    c.fusion_hidden = 3;
    c.highway_window = 2;
    forecast::LstNet net(c, 3, r2);
    auto gru = diff::GruParams::zeros(c.conv_channels, c.skip_hidden);
    auto copy = [](const Tensor& src, Tensor dst) {
      std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
    };
    copy(net.skip_gru().w_input, gru.w_input);
    copy(net.skip_gru().w_hidden, gru.w_hidden);
    copy(net.skip_gru().bias_input, gru.bias_input);
    copy(net.skip_gru().bias_hidden, gru.bias_hidden);
    auto x = random_tensor({3, 8, 3}, r2);
    diff::Tape tape(diff::Tape::Mode::inference);
    auto tr = net.trace(tape, x, false, nullptr);
    Tensor h({tr.pooled.dim(0), gru.hidden_size}, 0.0);
    for (std::size_t t = 0; t < tr.pooled.dim(1); ++t) h = diff::gru_cell(tape, diff::time_step(tape, tr.pooled, t), h, gru);
    if (h.shape() != tr.skip.shape()) return {false, "skip-GRU output shape differs from the plain GRU"};
    for (std::size_t i = 0; i < h.numel(); ++i) worst_gru = std::max(worst_gru, std::abs(h.at(i) - tr.skip.at(i)));
  }
  std::ostringstream d;
  d << "GAE vs returns on " << kGaeEpisodes << " episodes max diff " << worst_gae
    << "; skip-GRU(p=1) vs GRU max diff " << worst_gru;
  return {worst_gae <= kGaeOracleTol && worst_gru <= kTransplantTol, d.str()};
}

// ---------------------------------------------------------------- criterion 4

Outcome differentiated_clipping() {
  ppo::AgentConfig cfg;
  cfg.policy.branches[0].clip_epsilon = 0.2;
  cfg.policy.branches[1].clip_epsilon = 0.1;
  ppo::Agent agent(cfg, 404);
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  const std::size_t B = 64;
  ppo::Minibatch mb;
  mb.rows = B;
  mb.actions.resize(2);
  mb.old_log_probs.resize(2);
  mb.advantages.resize(2);
  mb.returns.assign(2, std::vector<double>(B, 0.0));
  for (std::size_t k = 0; k < B; ++k) {
    std::vector<double> s(17);
    for (auto& x : s) x = g(rng);
    mb.states.insert(mb.states.end(), s.begin(), s.end());
    const auto dists = agent.policy().distributions(s);
    const auto a = neuro::sample_action(dists, rng);
    const auto lp = neuro::log_prob(dists, a);
    mb.actions[0].push_back(a[0]);
    mb.actions[1].insert(mb.actions[1].end(), a.begin() + 1, a.end());
    for (std::size_t i = 0; i < 2; ++i) {
      mb.old_log_probs[i].push_back(lp[i] - std::log(kClipRatio));
      mb.advantages[i].push_back(pos(rng));
    }
  }
  diff::Tape tape;
  const auto rep = agent.evaluate_losses(tape, mb);
  double unclipped_w = 0.0, clipped_h = 0.0;
  for (std::size_t k = 0; k < B; ++k) {
    unclipped_w += kClipRatio * mb.advantages[0][k];
    clipped_h += 1.1 * mb.advantages[1][k];
  }
  unclipped_w /= static_cast<double>(B);
  clipped_h /= static_cast<double>(B);
  const bool width_free = rep.clip_fraction[0] == 0.0 && std::abs(rep.surrogate[0] - unclipped_w) <= 1e-12;
  const bool thick_clipped = rep.clip_fraction[1] == 1.0 && std::abs(rep.surrogate[1] - clipped_h) <= 1e-12;
  std::ostringstream d;
  d << "width clip fraction " << rep.clip_fraction[0] << " surrogate " << rep.surrogate[0] << " (1.15 mean A "
    << unclipped_w << "); thickness clip fraction " << rep.clip_fraction[1] << " surrogate " << rep.surrogate[1]
    << " (1.1 mean A " << clipped_h << ")";
  return {width_free && thick_clipped, d.str()};
}

// ---------------------------------------------------------------- criterion 5

Outcome forecaster_ordering(const bench::Config& cfg, const fs::path& out) {
  std::size_t wins = 0;
  std::ostringstream d;
  d << "width test MAE lstnet/linreg per seed:";
  for (std::uint64_t seed = 0; seed < kForecastSeeds; ++seed) {
    nlohmann::json m;
    if (seed == cfg.experiment.forecaster_seed) {
      m = bench::ensure_forecasters(cfg, out, &std::cerr).metrics.at("width");
    } else {
      const auto series = bench::generate_series(cfg, seed);
      m = bench::fit_forecaster(cfg, forecast::width_spec(), series, bench::derive_seed(seed, 11)).metrics;
    }
    const double lst = m.at("lstnet").at("mae").get<double>();
    const double lin = m.at("linreg").at("mae").get<double>();
    wins += lst < lin ? 1 : 0;
    d << ' ' << seed << ':' << lst << '/' << lin;
    std::cerr << "  forecaster seed " << seed << " width mae lstnet " << lst << " linreg " << lin << '\n';
  }
  d << "; lstnet better in " << wins << " of " << kForecastSeeds;
  return {wins >= kForecastWins, d.str()};
}

// ---------------------------------------------------------------- criterion 6

Outcome convergence(const bench::Config& cfg, const fs::path& out) {
  const auto bundle = bench::ensure_forecasters(cfg, out, &std::cerr);
  bench::GridSelection sel;
  sel.variants = {ppo::kVariantMpdPpo};
  sel.resume = true;
  const auto records = bench::run_grid(cfg, &bundle, out, sel, &std::cerr);
  bool ok = true;
  std::ostringstream d;
  for (const auto& sc : cfg.experiment.grid_scenarios()) {
    const auto rs = bench::select(records, ppo::kVariantMpdPpo, sc);
    const auto a = bench::aggregate(rs);
    d << sc.name() << " " << a.mean << "; ";
    if (rs.empty()) {
      ok = false;
      continue;
    }
    if (sc.steps == 100 && !(a.mean <= kConvergedSteps)) ok = false;
    bool any_success = false;
    for (const auto& r : rs) any_success = any_success || r.average_optimize_step < static_cast<double>(sc.steps);
    if (!any_success) ok = false;
  }
  return {ok, "mean greedy optimize step per scenario: " + d.str()};
}

// ---------------------------------------------------------------- criterion 7

Outcome ablations(const bench::Config& cfg, const fs::path& out) {
  const auto bundle = bench::ensure_forecasters(cfg, out, &std::cerr);
  bench::GridSelection sel;
  sel.resume = true;
  bench::run_ablations(cfg, &bundle, out, sel, &std::cerr);
  const auto records = bench::load_records(out);
  const auto verdicts = bench::write_tables(records, cfg.experiment.ablation_scenario(), out);
  bench::write_plots(records, cfg.episode, out);
  const std::set<std::string> gated{"mpd-ppo < mpd-ppo-uniform-clip", "mpd-ppo < ppo-single-net",
                                    "reward-4 <= reward-3"};
  bool ok = true;
  std::ostringstream d;
  for (const auto& v : verdicts) {
    if (gated.count(v.check) == 0 && v.verdict != "INFO") continue;
    d << v.check << ": " << v.verdict << "; ";
    if (gated.count(v.check) && v.verdict != "PASS") ok = false;
  }
  const auto sc = cfg.experiment.ablation_scenario();
  d << "means:";
  for (const auto& v : cfg.experiment.ablation_variants) d << ' ' << v << '=' << bench::aggregate(bench::select(records, v, sc)).mean;
  return {ok, d.str()};
}

// ---------------------------------------------------------------- criterion 8

Outcome determinism(const bench::Config& cfg, const fs::path& out) {
  const auto bundle = bench::ensure_forecasters(cfg, out, &std::cerr);
  const auto sc = cfg.experiment.ablation_scenario();
  const auto rerun = out / "rerun";
  fs::remove_all(rerun);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  std::ostringstream d;
  bool ok = true;
  for (const std::string variant : {std::string(ppo::kVariantMpdPpo), std::string(ppo::kVariantSingleNet)}) {
    const auto first = bench::cell_dir(out, variant, sc, 0);
    if (!fs::exists(first / "curve.csv")) bench::run_cell(cfg, variant, sc, 0, &bundle, out);
    bench::run_cell(cfg, variant, sc, 0, &bundle, rerun);
    const auto second = bench::cell_dir(rerun, variant, sc, 0);
    const bool same_curve = slurp(first / "curve.csv") == slurp(second / "curve.csv");
    const bool same_record = slurp(first / "record.json") == slurp(second / "record.json");
    d << variant << " curve.csv " << (same_curve ? "identical" : "DIFFERS") << ", record.json "
      << (same_record ? "identical" : "DIFFERS") << "; ";
    ok = ok && same_curve && same_record;
  }
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-8"};
  std::string config_path;
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  bool fresh = false;
  app.add_option("--config", config_path, "Desk configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Working directory for trained artifacts")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--fresh", fresh, "Delete the working directory first");
  CLI11_PARSE(app, argc, argv);

  const auto cfg = config_path.empty() ? bench::parse_config("") : bench::load_config(config_path);
  const fs::path out = out_dir;
  if (fresh) fs::remove_all(out);
  fs::create_directories(out);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradients},
      {2, closed_forms},
      {3, oracle_equivalences},
      {4, differentiated_clipping},
      {5, [&] { return forecaster_ordering(cfg, out); }},
      {6, [&] { return convergence(cfg, out); }},
      {7, [&] { return ablations(cfg, out); }},
      {8, [&] { return determinism(cfg, out); }},
  };
  bool gated_ok = true;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool reported_only = id == 7;
    if (!o.pass && !reported_only) gated_ok = false;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " [" << std::fixed
              << std::setprecision(1) << secs << " s] " << std::defaultfloat << o.detail
              << (reported_only && !o.pass ? " (ordinal replication target, reported without gating)" : "") << '\n'
              << std::flush;
  }
  return gated_ok ? 0 : 1;
}
