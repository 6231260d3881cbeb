#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mpd/diff/ops.hpp"
#include "mpd/forecast/model.hpp"
#include "support/gradcheck.hpp"

using namespace mpd;
using diff::Tensor;

namespace {

forecast::ForecasterConfig tiny_config() {
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
  return c;
}

Tensor random_tensor(diff::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.mutable_values()) v = n(rng);
  return t;
}

// Series with the given target column and independent noise features.
plant::Series synthetic_series(std::size_t rows, std::size_t features, std::mt19937_64& rng,
                               const std::function<double(const std::vector<double>&)>& target) {
  plant::Series s;
  for (std::size_t f = 0; f < features; ++f) s.columns.push_back("f" + std::to_string(f));
  s.columns.push_back("y");
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row(features);
    for (auto& v : row) v = n(rng);
    s.data.insert(s.data.end(), row.begin(), row.end());
    s.data.push_back(target(row));
  }
  return s;
}

forecast::FeatureSpec synthetic_spec(std::size_t features) {
  forecast::FeatureSpec spec{"y", "y", {}, 1.0};
  for (std::size_t f = 0; f < features; ++f) spec.features.push_back("f" + std::to_string(f));
  return spec;
}

// Plain GRU over every step of seq [B x L x C]; the oracle for skip period 1.
Tensor plain_gru(diff::Tape& tape, const Tensor& seq, const diff::GruParams& p) {
  Tensor h({seq.dim(0), p.hidden_size}, 0.0);
  for (std::size_t t = 0; t < seq.dim(1); ++t) h = diff::gru_cell(tape, diff::time_step(tape, seq, t), h, p);
  return h;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.conv_length() == 6);
  CHECK(c.pooled_length() == 3);
  auto bad = c;
  bad.window = 2;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("window"), std::invalid_argument);
  bad = c;
  bad.skip_period = 3;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("skip_period"), std::invalid_argument);
  bad = c;
  bad.skip_period = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.dropout = 1.0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("dropout"), std::invalid_argument);
  forecast::ForecasterConfig defaults;
  CHECK_NOTHROW(defaults.validate());
  CHECK(defaults.pooled_length() == 13);
  CHECK(forecast::ForecasterConfig::from_json(defaults.to_json()).to_json() == defaults.to_json());
}

TEST_CASE("all-zero parameters predict the de-normalized output bias") {
  std::mt19937_64 rng(1);
  forecast::Normalizer norm{{0, 0, 0}, {1, 1, 1}, 450.0, 30.0};
  forecast::Forecaster f(tiny_config(), synthetic_spec(3), norm, rng);
  for (const auto& e : f.net().parameters().entries()) {
    Tensor t = e.tensor;
    std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
  }
  Tensor b = f.net().parameters().at("output.bias");
  b.mutable_values()[0] = 0.5;
  std::vector<double> window(8 * 3);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int k = 0; k < 4; ++k) {
    for (auto& v : window) v = n(rng);
    CHECK(f.predict(window) == doctest::Approx(450.0 + 0.5 * 30.0).epsilon(1e-14));
  }
}

TEST_CASE("eval-mode forward is bit-exact and rejects bad shapes") {
  std::mt19937_64 rng(2);
  auto cfg = tiny_config();
  cfg.dropout = 0.3;
  forecast::LstNet net(cfg, 3, rng);
  auto x = random_tensor({4, 8, 3}, rng);
  diff::Tape t1(diff::Tape::Mode::inference), t2(diff::Tape::Mode::inference);
  auto a = net.forward(t1, x, false, nullptr);
  auto b = net.forward(t2, x, false, nullptr);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK(a.shape() == diff::Shape{4, 1});

  // Training mode with dropout differs from eval mode and needs a generator.
  diff::Tape t3;
  CHECK_THROWS_AS(net.forward(t3, x, true, nullptr), std::invalid_argument);
  auto c = net.forward(t3, x, true, &rng);
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));

  CHECK_THROWS_AS(net.forward(t1, random_tensor({4, 7, 3}, rng), false, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(t1, random_tensor({4, 8, 2}, rng), false, nullptr), std::invalid_argument);
}

TEST_CASE("LSTNet gradients match finite differences at tiny size") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(100 + seed);
    forecast::LstNet net(tiny_config(), 3, rng);
    // Non-zero highway weights so that path is exercised too.
    Tensor hw = net.parameters().at("highway.weight");
    for (auto& v : hw.mutable_values()) v = 0.1;
    auto x = random_tensor({2, 8, 3}, rng);
    auto w = random_tensor({2, 1}, rng);
    auto leaves = net.parameters().tensors();
    auto res = testing::grad_check(
        [&](diff::Tape& tape) { return diff::sum(tape, diff::mul(tape, net.forward(tape, x, false, nullptr), w)); },
        leaves);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-4);
    CHECK(res.checked == net.parameters().scalar_count());
  }
}

TEST_CASE("skip-GRU with period 1 is an ordinary GRU (weight transplant)") {
  std::mt19937_64 rng(3);
  auto cfg = tiny_config();
  cfg.skip_period = 1;
  forecast::LstNet net(cfg, 3, rng);
  auto gru = diff::GruParams::zeros(cfg.conv_channels, cfg.skip_hidden);
  auto copy = [](const Tensor& src, Tensor dst) {
    std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
  };
  copy(net.skip_gru().w_input, gru.w_input);
  copy(net.skip_gru().w_hidden, gru.w_hidden);
  copy(net.skip_gru().bias_input, gru.bias_input);
  copy(net.skip_gru().bias_hidden, gru.bias_hidden);

  auto x = random_tensor({3, 8, 3}, rng);
  diff::Tape tape(diff::Tape::Mode::inference);
  auto tr = net.trace(tape, x, false, nullptr);
  auto oracle = plain_gru(tape, tr.pooled, gru);
  REQUIRE(tr.skip.shape() == oracle.shape());
  for (std::size_t i = 0; i < oracle.numel(); ++i) CHECK(std::abs(tr.skip.at(i) - oracle.at(i)) <= 1e-12);
}

TEST_CASE("skip-GRU phases take every p-th step ending at the most recent ones") {
  std::mt19937_64 rng(4);
  auto gru = diff::GruParams::init(2, 3, rng);
  auto seq = random_tensor({2, 7, 2}, rng);
  diff::Tape tape(diff::Tape::Mode::inference);
  auto out = forecast::skip_gru(tape, seq, gru, 3);
  REQUIRE(out.shape() == diff::Shape{2, 9});
  // Phase j visits steps 6-j, 3-j, ... in chronological order.
  const std::vector<std::vector<std::size_t>> phases{{0, 3, 6}, {2, 5}, {1, 4}};
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor h({2, 3}, 0.0);
    for (auto t : phases[j]) h = diff::gru_cell(tape, diff::time_step(tape, seq, t), h, gru);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t k = 0; k < 3; ++k) CHECK(out.at(b, j * 3 + k) == h.at(b, k));
  }
}

TEST_CASE("evaluate metrics") {
  std::vector<double> y{1.0, 2.0, 3.0};
  auto perfect = forecast::evaluate(y, y, 1.0);
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.qualification_rate == 1.0);

  std::vector<double> actual{0.0, 0.0};
  auto m1 = forecast::evaluate(std::vector<double>{1.0, -1.0}, actual, 1.0);
  CHECK(m1.mae == doctest::Approx(1.0));
  CHECK(m1.rmse == doctest::Approx(1.0));
  CHECK(m1.qualification_rate == 1.0);
  auto m2 = forecast::evaluate(std::vector<double>{0.0, 2.0}, actual, 1.0);
  CHECK(m2.mae == doctest::Approx(1.0));
  CHECK(m2.rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m2.qualification_rate == 0.5);

  CHECK_THROWS_AS(forecast::evaluate(std::vector<double>{}, std::vector<double>{}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(forecast::evaluate(y, y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(forecast::evaluate(y, actual, 1.0), std::invalid_argument);
}

TEST_CASE("metric invariants on random errors") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(25), a(25, 0.0);
    for (auto& v : p) v = n(rng);
    auto m = forecast::evaluate(p, a, 1.0);
    CHECK(m.rmse >= m.mae);
    CHECK(m.mae >= 0.0);
    double prev = -1.0;
    for (double tol : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      const double qr = forecast::evaluate(p, a, tol).qualification_rate;
      CHECK(qr >= prev);
      CHECK(qr <= 1.0);
      prev = qr;
    }
  }
}

TEST_CASE("prepare: chronological disjoint splits and train-only statistics") {
  std::mt19937_64 rng(6);
  // Drifting feature so train-only statistics differ from full-series ones.
  auto s = synthetic_series(400, 2, rng, [](const std::vector<double>& r) { return r[0]; });
  for (std::size_t r = 0; r < s.rows(); ++r) s.data[r * 3] += 0.05 * static_cast<double>(r);
  auto d = forecast::prepare(s, synthetic_spec(2), 8);
  REQUIRE_FALSE(d.train.empty());
  REQUIRE_FALSE(d.validation.empty());
  REQUIRE_FALSE(d.test.empty());
  CHECK(d.train.back() + 8 < d.validation.front());
  CHECK(d.validation.back() + 8 < d.test.front());
  CHECK(d.test.back() == 398);

  const std::size_t train_rows = d.train.back() + 2;
  double m = 0.0;
  for (std::size_t r = 0; r < train_rows; ++r) m += s.at(r, 0);
  m /= static_cast<double>(train_rows);
  CHECK(d.norm.mean[0] == doctest::Approx(m).epsilon(1e-12));
  double full = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) full += s.at(r, 0);
  CHECK(std::abs(d.norm.mean[0] - full / static_cast<double>(s.rows())) > 1.0);

  std::normal_distribution<double> n(0.0, 100.0);
  for (int k = 0; k < 100; ++k) {
    const double y = n(rng);
    CHECK(std::abs(d.norm.denormalize_target(d.norm.normalize_target(y)) - y) <= 1e-12 * std::max(1.0, std::abs(y)));
  }
  CHECK_THROWS_AS(forecast::prepare(s, synthetic_spec(2), 8, {0.9, 0.2}), std::invalid_argument);
  plant::Series tiny = synthetic_series(12, 2, rng, [](const std::vector<double>&) { return 0.0; });
  CHECK_THROWS_AS(forecast::prepare(tiny, synthetic_spec(2), 8), std::invalid_argument);
}

TEST_CASE("training learns a constant target and keeps a finite loss trace") {
  std::mt19937_64 rng(7);
  auto s = synthetic_series(400, 3, rng, [](const std::vector<double>&) { return 2.5; });
  auto d = forecast::prepare(s, synthetic_spec(3), 8);
  auto cfg = tiny_config();
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.lr = 1e-2;
  auto r = forecast::train_forecaster(cfg, synthetic_spec(3), d, rng);
  REQUIRE(r.history.size() == 10);
  for (const auto& e : r.history) {
    CHECK(std::isfinite(e.train_mae));
    CHECK(std::isfinite(e.val_mae));
  }
  CHECK(r.test.mae < 0.05);
  CHECK(r.history.back().train_mae < r.history.front().train_mae);
  CHECK(r.best_epoch >= 1);

  forecast::PreparedData empty = d;
  empty.train.clear();
  CHECK_THROWS_AS(forecast::train_forecaster(cfg, synthetic_spec(3), empty, rng), std::invalid_argument);
}

TEST_CASE("training is seed-deterministic and checkpoints round-trip") {
  std::mt19937_64 data_rng(8);
  auto s = synthetic_series(300, 3, data_rng, [](const std::vector<double>& r) { return 2.0 * r[0] - r[2]; });
  auto d = forecast::prepare(s, synthetic_spec(3), 8);
  auto cfg = tiny_config();
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.dropout = 0.2;
  std::mt19937_64 a(9), b(9);
  auto ra = forecast::train_forecaster(cfg, synthetic_spec(3), d, a);
  auto rb = forecast::train_forecaster(cfg, synthetic_spec(3), d, b);
  CHECK(ra.history.back().val_mae == rb.history.back().val_mae);
  CHECK(ra.test.mae == rb.test.mae);

  const auto path = std::filesystem::temp_directory_path() / "mpd_test_forecaster.json";
  ra.model.save(path);
  auto loaded = forecast::Forecaster::load(path);
  auto p1 = ra.model.predict(d, d.test);
  auto p2 = loaded.predict(d, d.test);
  CHECK(p1 == p2);
  CHECK(loaded.spec().features == synthetic_spec(3).features);
  std::filesystem::remove(path);
}

TEST_CASE("linear regression baseline") {
  std::mt19937_64 rng(10);
  SUBCASE("exactly linear target is recovered") {
    // y at row t+1 depends on the features at row t through a lagged copy.
    auto s = synthetic_series(600, 3, rng, [](const std::vector<double>&) { return 0.0; });
    for (std::size_t r = 0; r + 1 < s.rows(); ++r)
      s.data[(r + 1) * 4 + 3] = 5.0 + 1.5 * s.at(r, 0) - 0.7 * s.at(r, 1) + 0.2 * s.at(r, 2);
    auto d = forecast::prepare(s, synthetic_spec(3), 4);
    auto m = forecast::linreg_baseline(d, 1.0);
    CHECK(m.test.mae < 1e-6);
    CHECK(m.test.qualification_rate == 1.0);
  }
  SUBCASE("ridge damping barely moves well-conditioned coefficients") {
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t rows = 200, dims = 4;
    std::vector<double> X(rows * dims), y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < dims; ++k) X[i * dims + k] = n(rng);
      y[i] = 1.0 + X[i * dims] - 2.0 * X[i * dims + 3] + 0.1 * n(rng);
    }
    auto damped = forecast::ridge_fit(X, y, dims, 1e-6);
    auto plain = forecast::ridge_fit(X, y, dims, 0.0);
    for (std::size_t k = 0; k <= dims; ++k) CHECK(std::abs(damped[k] - plain[k]) < 1e-3);
    CHECK(plain[dims] == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("duplicate features are handled by damping") {
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t rows = 100;
    std::vector<double> X(rows * 2), y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      X[i * 2] = X[i * 2 + 1] = n(rng);
      y[i] = 3.0 * X[i * 2];
    }
    std::vector<double> beta;
    CHECK_NOTHROW(beta = forecast::ridge_fit(X, y, 2, 1e-6));
    CHECK(beta[0] + beta[1] == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(beta[0] == doctest::Approx(beta[1]).epsilon(1e-6));
    CHECK_THROWS_AS(forecast::ridge_fit(X, y, 2, 0.0), std::runtime_error);
  }
}

TEST_CASE("feature schemas reference plant series columns") {
  plant::PlantParams p;
  auto cols = plant::series_columns(p);
  for (const auto& spec : {forecast::width_spec(), forecast::thickness_spec()}) {
    for (const auto& f : spec.features) CHECK(std::find(cols.begin(), cols.end(), f) != cols.end());
    CHECK(std::find(cols.begin(), cols.end(), spec.target) != cols.end());
    CHECK(std::find(spec.features.begin(), spec.features.end(), spec.target) == spec.features.end());
  }
  CHECK(forecast::width_spec().features.size() == 20);
  CHECK(forecast::thickness_spec().features.size() == 17);
  CHECK(forecast::width_spec().tolerance == 1.0);
  CHECK(forecast::thickness_spec().tolerance == 0.05);
}
