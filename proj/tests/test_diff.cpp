#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "mpd/diff/adam.hpp"
#include "mpd/diff/ops.hpp"
#include "mpd/diff/rnn.hpp"
#include "support/gradcheck.hpp"

using namespace mpd::diff;
using mpd::testing::grad_check;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.mutable_values()) v = d(rng);
  return t;
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("elementwise examples") {
  Tape tape;
  CHECK(tanh(tape, Tensor::vector({0.0})).item() == 0.0);
  CHECK(clip(tape, Tensor::vector({1.5}), 0.8, 1.2).item() == 1.2);
  CHECK(exp(tape, Tensor::vector({-1.0})).item() == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(relu(tape, Tensor::vector({-2.0, 3.0})).at(0) == 0.0);
  CHECK(square(tape, Tensor::vector({-3.0})).item() == 9.0);
  CHECK(neg(tape, Tensor::vector({2.0})).item() == -2.0);
  CHECK(scale(tape, Tensor::vector({2.0}), 0.25).item() == 0.5);
  CHECK(minimum(tape, Tensor::vector({1.0, 5.0}), Tensor::vector({2.0, 4.0})).at(1) == 4.0);
  CHECK(maximum(tape, Tensor::vector({1.0, 5.0}), Tensor::vector({2.0, 4.0})).at(0) == 2.0);
}

TEST_CASE("scalar broadcasting on either side") {
  Tape tape;
  auto x = Tensor::vector({1.0, 2.0, 3.0});
  auto s = Tensor::scalar(2.0);
  CHECK(to_vec(mul(tape, x, s)) == std::vector<double>{2.0, 4.0, 6.0});
  CHECK(to_vec(sub(tape, s, x)) == std::vector<double>{1.0, 0.0, -1.0});

  x.set_requires_grad(true);
  s.set_requires_grad(true);
  auto loss = sum(tape, mul(tape, x, s));
  tape.backward(loss);
  CHECK(s.grad()[0] == 6.0);
  CHECK(to_vec(Tensor(Shape{3}, {x.grad().begin(), x.grad().end()})) == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("binary shape mismatch names both shapes") {
  Tape tape;
  try {
    add(tape, Tensor(Shape{2, 3}), Tensor(Shape{3, 2}));
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[3, 2]") != std::string::npos);
  }
}

TEST_CASE("division by zero is an error, not Inf") {
  Tape tape;
  CHECK_THROWS_AS(div(tape, Tensor::vector({1.0}), Tensor::vector({0.0})), std::domain_error);
  CHECK(div(tape, Tensor::vector({1.0}), Tensor::vector({4.0})).item() == 0.25);
}

TEST_CASE("clip is the pointwise median of lo, x, hi") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  Tape tape(Tape::Mode::inference);
  for (int trial = 0; trial < 1000; ++trial) {
    double lo = d(rng), hi = d(rng), x = d(rng);
    if (lo > hi) std::swap(lo, hi);
    double v[3] = {lo, x, hi};
    std::sort(v, v + 3);
    CHECK(clip(tape, Tensor::vector({x}), lo, hi).item() == v[1]);
  }
}

TEST_CASE("matmul examples") {
  Tape tape;
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(to_vec(matmul(tape, eye, m)) == to_vec(m));
  CHECK(matmul(tape, Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4})).item() == 11.0);
  std::mt19937_64 rng(3);
  auto z = matmul(tape, Tensor(Shape{2, 3}), random_tensor({3, 4}, rng));
  CHECK(z.shape() == Shape{2, 4});
  for (double v : z.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(matmul(tape, Tensor(Shape{2, 3}), Tensor(Shape{2, 3})), std::invalid_argument);
}

TEST_CASE("matmul gradients follow the transpose rules") {
  std::mt19937_64 rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto r = grad_check([&](Tape& t) { return sum(t, square(t, matmul(t, a, b))); }, {a, b});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("conv1d examples") {
  Tape tape;
  auto x = Tensor::matrix(4, 1, {1, 1, 1, 1});
  auto k2 = Tensor(Shape{2, 1, 1}, {1, 1});
  CHECK(to_vec(conv1d(tape, x, k2)) == std::vector<double>{2, 2, 2});

  std::mt19937_64 rng(5);
  auto xr = random_tensor({6, 1}, rng);
  CHECK(to_vec(conv1d(tape, xr, Tensor(Shape{1, 1, 1}, {1.0}))) == to_vec(xr));
  auto zero_out = conv1d(tape, xr, Tensor(Shape{2, 1, 1}, {0.0, 0.0}));
  for (double v : zero_out.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(conv1d(tape, x, Tensor(Shape{5, 1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(conv1d(tape, x, k2, 0), std::invalid_argument);
}

TEST_CASE("conv1d output length is floor((T - k) / stride) + 1") {
  Tape tape(Tape::Mode::inference);
  for (std::size_t T = 3; T < 12; ++T)
    for (std::size_t k = 1; k <= T; ++k)
      for (std::size_t s = 1; s < 4; ++s) {
        auto y = conv1d(tape, Tensor(Shape{T, 2}), Tensor(Shape{k, 2, 3}), s);
        CHECK(y.dim(0) == (T - k) / s + 1);
        CHECK(y.dim(1) == 3);
      }
}

TEST_CASE("conv1d batched matches per-sample and has correct gradients") {
  std::mt19937_64 rng(17);
  auto x = random_tensor({3, 9, 2}, rng);
  auto k = random_tensor({3, 2, 4}, rng);
  auto b = random_tensor({4}, rng);
  Tape tape(Tape::Mode::inference);
  auto y = conv1d(tape, x, k, b, 2);
  CHECK(y.shape() == Shape{3, 4, 4});
  for (std::size_t n = 0; n < 3; ++n) {
    auto xv = x.values().subspan(n * 18, 18);
    auto single = conv1d(tape, Tensor(Shape{9, 2}, {xv.begin(), xv.end()}), k, b, 2);
    for (std::size_t i = 0; i < 16; ++i) CHECK(single.at(i) == y.at(n * 16 + i));
  }
  auto r = grad_check([&](Tape& t) { return sum(t, tanh(t, conv1d(t, x, k, b, 2))); }, {x, k, b});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("max_pool1d examples and tie rule") {
  Tape tape;
  auto x = Tensor::matrix(4, 1, {1, 3, 2, 5});
  CHECK(to_vec(max_pool1d(tape, x, 2)) == std::vector<double>{3, 5});
  CHECK(to_vec(max_pool1d(tape, x, 1)) == to_vec(x));
  CHECK(to_vec(max_pool1d(tape, Tensor(Shape{6, 1}, 2.5), 3)) == std::vector<double>{2.5, 2.5});
  // trailing remainder dropped
  CHECK(max_pool1d(tape, Tensor(Shape{5, 2}), 2).dim(0) == 2);
  CHECK_THROWS_AS(max_pool1d(tape, x, 5), std::invalid_argument);
  CHECK_THROWS_AS(max_pool1d(tape, x, 0), std::invalid_argument);

  auto ties = Tensor::matrix(4, 1, {7, 7, 1, 1});
  ties.set_requires_grad(true);
  Tape t2;
  t2.backward(sum(t2, max_pool1d(t2, ties, 2)));
  CHECK(to_vec(Tensor(Shape{4}, {ties.grad().begin(), ties.grad().end()})) == std::vector<double>{1, 0, 1, 0});
}

TEST_CASE("layer_norm examples") {
  Tape tape;
  auto ones = Tensor::vector({1.0, 1.0});
  auto zeros = Tensor::vector({0.0, 0.0});
  auto flat = layer_norm(tape, Tensor::vector({3.0, 3.0}), ones, zeros);
  for (double v : flat.values()) CHECK(v == 0.0);
  auto y = layer_norm(tape, Tensor::vector({1.0, -1.0}), ones, zeros, 1e-14);
  CHECK(y.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.at(1) == doctest::Approx(-1.0).epsilon(1e-12));

  std::mt19937_64 rng(2);
  auto x = random_tensor({5, 6}, rng, -4, 4);
  auto bias = Tensor(Shape{6}, 0.75);
  auto out = layer_norm(tape, x, Tensor(Shape{6}, 1.3), bias);
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < 6; ++c) m += out.at(r, c);
    CHECK(m / 6.0 == doctest::Approx(0.75).epsilon(1e-12));
  }
  CHECK_THROWS_AS(layer_norm(tape, x, ones, zeros), std::invalid_argument);
}

TEST_CASE("layer_norm gradients") {
  std::mt19937_64 rng(23);
  auto x = random_tensor({3, 5}, rng, -2, 2);
  auto g = random_tensor({5}, rng, 0.5, 1.5);
  auto b = random_tensor({5}, rng);
  auto w = random_tensor({3, 5}, rng);
  auto r = grad_check([&](Tape& t) { return sum(t, mul(t, w, layer_norm(t, x, g, b))); }, {x, g, b});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("dropout: eval mode is identity, train mode is inverted") {
  std::mt19937_64 rng(1);
  Tape tape;
  auto x = Tensor(Shape{1000}, 1.0);
  auto eval = dropout(tape, x, 0.3, false, rng);
  CHECK(to_vec(eval) == to_vec(x));
  auto train = dropout(tape, x, 0.5, true, rng);
  double total = 0.0;
  for (double v : train.values()) {
    CHECK((v == 0.0 || v == 2.0));
    total += v;
  }
  CHECK(total / 1000.0 == doctest::Approx(1.0).epsilon(0.15));
  CHECK_THROWS_AS(dropout(tape, x, 1.0, true, rng), std::invalid_argument);
}

TEST_CASE("lstm_cell examples") {
  Tape tape;
  auto zero = LstmParams::zeros(3, 4);
  auto x = Tensor::matrix(1, 3, {0.3, -0.2, 0.9});
  auto h0 = Tensor(Shape{1, 4});
  auto c0 = Tensor::matrix(1, 4, {0.5, -1.0, 2.0, 0.1});
  auto out = lstm_cell(tape, x, h0, c0, zero);
  // c = 0.5 * c0, h = 0.5 * tanh(c) -- gates at sigmoid(0) = 0.5, candidate tanh(0) = 0
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.c.at(i) == doctest::Approx(0.5 * c0.at(i)));
  auto z = lstm_cell(tape, x, h0, Tensor(Shape{1, 4}), zero);
  for (double v : z.h.values()) CHECK(v == 0.0);

  // Forget gate saturated: c_t = c_prev + sigmoid(0) * tanh(0.3)
  auto sat = LstmParams::zeros(3, 4);
  auto bv = sat.bias.mutable_values();
  for (std::size_t j = 0; j < 4; ++j) {
    bv[4 + j] = 60.0;
    bv[8 + j] = 0.3;
  }
  auto s = lstm_cell(tape, x, h0, c0, sat);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.c.at(i) == doctest::Approx(c0.at(i) + 0.5 * std::tanh(0.3)).epsilon(1e-12));

  CHECK_THROWS_AS(lstm_cell(tape, Tensor(Shape{1, 2}), h0, c0, zero), std::invalid_argument);
}

TEST_CASE("lstm_cell gradients match finite differences") {
  std::mt19937_64 rng(31);
  auto p = LstmParams::init(3, 4, rng);
  auto x = random_tensor({2, 3}, rng);
  auto h = random_tensor({2, 4}, rng);
  auto c = random_tensor({2, 4}, rng);
  auto w = random_tensor({2, 4}, rng);
  auto r = grad_check(
      [&](Tape& t) {
        auto s = lstm_cell(t, x, h, c, p);
        return add(t, sum(t, mul(t, w, s.h)), sum(t, s.c));
      },
      {p.w_input, p.w_hidden, p.bias, x, h, c});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gru_cell examples") {
  Tape tape;
  auto zero = GruParams::zeros(2, 3);
  auto h0 = Tensor(Shape{1, 3});
  auto h_zero = gru_cell(tape, Tensor::matrix(1, 2, {0.0, 0.0}), h0, zero);
  for (double v : h_zero.values()) CHECK(v == 0.0);

  std::mt19937_64 rng(4);
  auto p = GruParams::init(2, 3, rng);
  auto bv = p.bias_input.mutable_values();
  for (std::size_t j = 0; j < 3; ++j) bv[3 + j] = 80.0;
  auto hp = Tensor::matrix(1, 3, {0.4, -0.7, 0.1});
  auto h = gru_cell(tape, Tensor::matrix(1, 2, {0.5, 0.5}), hp, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(h.at(i) == doctest::Approx(hp.at(i)).epsilon(1e-12));
  CHECK_THROWS_AS(gru_cell(tape, Tensor(Shape{1, 3}), hp, p), std::invalid_argument);
}

TEST_CASE("gru_cell gradients match finite differences") {
  std::mt19937_64 rng(37);
  auto p = GruParams::init(3, 4, rng);
  auto x = random_tensor({2, 3}, rng);
  auto h = random_tensor({2, 4}, rng);
  auto w = random_tensor({2, 4}, rng);
  auto r = grad_check([&](Tape& t) { return sum(t, mul(t, w, gru_cell(t, x, h, p))); },
                      {p.w_input, p.w_hidden, p.bias_input, p.bias_hidden, x, h});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("backward examples") {
  Tape tape;
  auto x = Tensor(Shape{2, 3}, 0.7);
  x.set_requires_grad(true);
  tape.backward(sum(tape, x));
  for (double g : x.grad()) CHECK(g == 1.0);

  Tape t2;
  auto s = Tensor::scalar(3.0);
  s.set_requires_grad(true);
  t2.backward(square(t2, s));
  CHECK(s.grad()[0] == 6.0);

  // A second sweep over the same tape accumulates into leaves.
  auto loss = square(t2, s);
  s.drop_grad();
  t2.backward(loss);
  t2.backward(loss);
  CHECK(s.grad()[0] == 12.0);

  CHECK_THROWS_AS(t2.backward(Tensor(Shape{2})), std::invalid_argument);
  CHECK_THROWS_AS(t2.backward(Tensor::scalar(1.0)), std::invalid_argument);
}

TEST_CASE("two-layer MLP gradients match finite differences") {
  std::mt19937_64 rng(41);
  auto x = random_tensor({4, 5}, rng);
  auto w1 = random_tensor({5, 6}, rng);
  auto b1 = random_tensor({6}, rng);
  auto w2 = random_tensor({6, 2}, rng);
  auto b2 = random_tensor({2}, rng);
  auto r = grad_check(
      [&](Tape& t) {
        auto h = tanh(t, linear(t, x, w1, b1));
        return mean(t, square(t, linear(t, h, w2, b2)));
      },
      {x, w1, b1, w2, b2});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("random compositions of primitives match finite differences over 100 seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t rows = 1 + seed % 3, cols = 2 + seed % 4;
    auto a = random_tensor({rows, cols}, rng);
    auto b = random_tensor({rows, cols}, rng, 0.5, 1.5);
    auto w = random_tensor({cols, 3}, rng);
    auto bias = random_tensor({3}, rng);
    auto row = random_tensor({cols}, rng);
    auto s = random_tensor({1}, rng);
    auto r = grad_check(
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
        {a, b, w, bias, row, s});
    worst = std::max(worst, r.max_rel_error);
    CHECK_MESSAGE(r.max_rel_error < 1e-4, "seed " << seed << ": " << r.worst);
  }
  MESSAGE("worst relative error over 100 seeds: " << worst);
}

TEST_CASE("tape replay is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(99);
    auto x = random_tensor({3, 8, 2}, rng);
    auto k = random_tensor({3, 2, 4}, rng);
    auto p = GruParams::init(4, 3, rng);
    ParameterList params;
    params.add("k", k);
    p.register_in(params, "gru.");
    Tape tape;
    auto seq = max_pool1d(tape, relu(tape, conv1d(tape, x, k)), 2);
    auto h = Tensor(Shape{3, 3});
    for (std::size_t t = 0; t < seq.dim(1); ++t) h = gru_cell(tape, time_step(tape, seq, t), h, p);
    auto loss = sum(tape, dropout(tape, h, 0.2, true, rng));
    tape.backward(loss);
    auto g = k.grad();
    return std::make_pair(loss.item(), std::vector<double>(g.begin(), g.end()));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam_step") {
  AdamOptions opt;
  opt.lr = 0.01;

  auto p = Tensor::vector({1.0, -2.0});
  std::vector<Tensor> params{p};
  auto state = AdamState::for_params(params);
  adam_step(params, state, opt);
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == -2.0);

  // t = 1: m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps).
  auto q = Tensor::vector({0.5, 0.5});
  std::vector<Tensor> qs{q};
  auto qs_state = AdamState::for_params(qs);
  q.mutable_grad()[0] = 3.0;
  q.mutable_grad()[1] = -0.2;
  adam_step(qs, qs_state, opt);
  CHECK(q.at(0) == doctest::Approx(0.5 - 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(q.at(1) == doctest::Approx(0.5 + 0.01 * 0.2 / (0.2 + 1e-8)).epsilon(1e-14));
  CHECK(!q.has_grad());

  // Identical gradients on consecutive steps: bias correction makes both
  // updates equal (m_hat = g and v_hat = g^2 at t = 2).
  const double before = q.at(0);
  q.mutable_grad()[0] = 3.0;
  adam_step(qs, qs_state, opt);
  CHECK(before - q.at(0) == doctest::Approx(0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));

  // A larger gradient at t = 3 is damped by the second moment: the step grows
  // by far less than the gradient ratio.
  const double before3 = q.at(0);
  q.mutable_grad()[0] = 30.0;
  adam_step(qs, qs_state, opt);
  CHECK(before3 - q.at(0) < 2.0 * 0.01);

  AdamState empty;
  CHECK_THROWS_AS(adam_step(qs, empty, opt), std::invalid_argument);
}

TEST_CASE("clip_grad_norm scales jointly") {
  auto a = Tensor::vector({0.0});
  auto b = Tensor::vector({0.0});
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 4.0;
  std::vector<Tensor> ps{a, b};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
}
