#include "mpd/diff/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpd::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MutMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + shape_str(x.shape()));
  }
}

template <class F, class DF>
Tensor unary(Tape& tape, const Tensor& x, F f, DF df) {
  Tensor out(x.shape());
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, df]() mutable {
      auto g = out.grad();
      auto xv = x.values();
      auto ov = out.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], ov[i]);
    });
  }
  return out;
}

enum class Broadcast { none, x_scalar, y_scalar };

Broadcast broadcast_kind(const Tensor& x, const Tensor& y, const char* op) {
  if (x.shape() == y.shape()) return Broadcast::none;
  if (x.numel() == 1) return Broadcast::x_scalar;
  if (y.numel() == 1) return Broadcast::y_scalar;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(x.shape()) + " and " +
                              shape_str(y.shape()));
}

// f(a, b) -> value; dfa/dfb(a, b, out) -> partial derivatives.
template <class F, class DA, class DB>
Tensor binary(Tape& tape, const Tensor& x, const Tensor& y, const char* op, F f, DA dfa, DB dfb) {
  const auto kind = broadcast_kind(x, y, op);
  Tensor out(kind == Broadcast::x_scalar ? y.shape() : x.shape());
  const auto n = out.numel();
  auto xv = x.values();
  auto yv = y.values();
  auto ov = out.mutable_values();
  const std::size_t xs = kind == Broadcast::x_scalar ? 0 : 1;
  const std::size_t ys = kind == Broadcast::y_scalar ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) ov[i] = f(xv[i * xs], yv[i * ys]);
  if (tape.should_record({&x, &y})) {
    tape.record({x, y}, out, [x, y, out, xs, ys, dfa, dfb]() mutable {
      auto g = out.grad();
      auto xv = x.values();
      auto yv = y.values();
      auto ov = out.values();
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i * xs] += g[i] * dfa(xv[i * xs], yv[i * ys], ov[i]);
      }
      if (y.requires_grad()) {
        auto gy = y.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gy[i * ys] += g[i] * dfb(xv[i * xs], yv[i * ys], ov[i]);
      }
    });
  }
  return out;
}

// Splits a rank-2/rank-3 sequence tensor into (batch, time, channels).
struct SeqDims {
  std::size_t batch, time, ch;
};

SeqDims seq_dims(const Tensor& x, const char* op) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw std::invalid_argument(std::string(op) + ": expected [time x ch] or [batch x time x ch], got " +
                              shape_str(x.shape()));
}

Shape seq_shape(const Tensor& like, std::size_t batch, std::size_t time, std::size_t ch) {
  if (like.rank() == 2) return {time, ch};
  return {batch, time, ch};
}

}  // namespace

Tensor add(Tape& tape, const Tensor& x, const Tensor& y) {
  return binary(
      tape, x, y, "add", [](double a, double b) { return a + b; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(Tape& tape, const Tensor& x, const Tensor& y) {
  return binary(
      tape, x, y, "sub", [](double a, double b) { return a - b; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(Tape& tape, const Tensor& x, const Tensor& y) {
  return binary(
      tape, x, y, "mul", [](double a, double b) { return a * b; }, [](double, double b, double) { return b; },
      [](double a, double, double) { return a; });
}

Tensor div(Tape& tape, const Tensor& x, const Tensor& y) {
  for (double v : y.values()) {
    if (v == 0.0) throw std::domain_error("div: divisor contains zero (shape " + shape_str(y.shape()) + ")");
  }
  return binary(
      tape, x, y, "div", [](double a, double b) { return a / b; },
      [](double, double b, double) { return 1.0 / b; }, [](double a, double b, double) { return -a / (b * b); });
}

Tensor minimum(Tape& tape, const Tensor& x, const Tensor& y) {
  return binary(
      tape, x, y, "minimum", [](double a, double b) { return a <= b ? a : b; },
      [](double a, double b, double) { return a <= b ? 1.0 : 0.0; },
      [](double a, double b, double) { return a <= b ? 0.0 : 1.0; });
}

Tensor maximum(Tape& tape, const Tensor& x, const Tensor& y) {
  return binary(
      tape, x, y, "maximum", [](double a, double b) { return a >= b ? a : b; },
      [](double a, double b, double) { return a >= b ? 1.0 : 0.0; },
      [](double a, double b, double) { return a >= b ? 0.0 : 1.0; });
}

Tensor exp(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor neg(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor square(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary(
      tape, x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(Tape& tape, const Tensor& x, double offset) {
  return unary(
      tape, x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor clip(Tape& tape, const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip: lo must not exceed hi");
  return unary(
      tape, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total);
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (auto& gx : x.mutable_grad()) gx += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_cols(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "sum_cols");
  const auto rows = x.dim(0), cols = x.dim(1);
  Tensor out(Shape{rows, 1});
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += xv[r * cols + c];
    ov[r] = s;
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, rows, cols]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  as_matrix(out.mutable_values(), m, n).noalias() = as_matrix(a.values(), m, k) * as_matrix(b.values(), k, n);
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, out, [a, b, out, m, k, n]() mutable {
      auto g = as_matrix(out.grad(), m, n);
      if (a.requires_grad()) {
        as_matrix(a.mutable_grad(), m, k).noalias() += g * as_matrix(b.values(), k, n).transpose();
      }
      if (b.requires_grad()) {
        as_matrix(b.mutable_grad(), k, n).noalias() += as_matrix(a.values(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const auto m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k || bias.numel() != n) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                                shape_str(w.shape()) + " and bias " + shape_str(bias.shape()));
  }
  Tensor out(Shape{m, n});
  auto o = as_matrix(out.mutable_values(), m, n);
  o.noalias() = as_matrix(x.values(), m, k) * as_matrix(w.values(), k, n);
  o.rowwise() += as_matrix(bias.values(), 1, n).row(0);
  if (tape.should_record({&x, &w, &bias})) {
    tape.record({x, w, bias}, out, [x, w, bias, out, m, k, n]() mutable {
      auto g = as_matrix(out.grad(), m, n);
      if (x.requires_grad()) {
        as_matrix(x.mutable_grad(), m, k).noalias() += g * as_matrix(w.values(), k, n).transpose();
      }
      if (w.requires_grad()) {
        as_matrix(w.mutable_grad(), k, n).noalias() += as_matrix(x.values(), m, k).transpose() * g;
      }
      if (bias.requires_grad()) {
        as_matrix(bias.mutable_grad(), 1, n) += g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor broadcast_rows(Tape& tape, const Tensor& row, std::size_t rows) {
  const auto n = row.numel();
  Tensor out(Shape{rows, n});
  auto rv = row.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r) std::copy(rv.begin(), rv.end(), ov.begin() + static_cast<long>(r * n));
  if (tape.should_record({&row})) {
    tape.record({row}, out, [row, out, rows, n]() mutable {
      auto g = out.grad();
      auto gr = row.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) gr[c] += g[r * n + c];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xv = x.values();
  Tensor out(std::move(shape), std::vector<double>(xv.begin(), xv.end()));
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const auto rows = x.dim(0), cols = x.dim(1);
  if (begin >= end || end > cols) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") invalid for shape " + shape_str(x.shape()));
  }
  const auto width = end - begin;
  Tensor out(Shape{rows, width});
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) ov[r * width + c] = xv[r * cols + begin + c];
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, rows, cols, begin, width]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c) gx[r * cols + begin + c] += g[r * width + c];
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const auto rows = parts.front().dim(0);
  std::size_t total = 0;
  bool record = false;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw std::invalid_argument("concat_cols: row count mismatch, " + shape_str(parts.front().shape()) +
                                  " vs " + shape_str(p.shape()));
    }
    total += p.dim(1);
    record = record || p.requires_grad();
  }
  Tensor out(Shape{rows, total});
  auto ov = out.mutable_values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) ov[r * total + offset + c] = pv[r * w + c];
    offset += w;
  }
  if (record && tape.recording()) {
    tape.record(parts, out, [parts, out, rows, total]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const auto w = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total + offset + c];
        }
        offset += w;
      }
    });
  }
  return out;
}

Tensor time_step(Tape& tape, const Tensor& x, std::size_t t) {
  require_rank(x, 3, "time_step");
  const auto batch = x.dim(0), time = x.dim(1), ch = x.dim(2);
  if (t >= time) throw std::out_of_range("time_step: index out of range for shape " + shape_str(x.shape()));
  Tensor out(Shape{batch, ch});
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) ov[b * ch + c] = xv[(b * time + t) * ch + c];
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, batch, time, ch, t]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c) gx[(b * time + t) * ch + c] += g[b * ch + c];
    });
  }
  return out;
}

namespace {

// A window of k consecutive rows of a row-major [time x in_ch] slab is a
// contiguous run of k*in_ch values, so im2col rows are plain copies.
void im2col(std::span<const double> xv, std::size_t b, std::size_t time, std::size_t in_ch, std::size_t stride,
            std::size_t t_out, std::size_t patch, RowMat& cols) {
  for (std::size_t t = 0; t < t_out; ++t) {
    const double* src = xv.data() + (b * time + t * stride) * in_ch;
    std::copy(src, src + patch, cols.row(static_cast<Eigen::Index>(t)).data());
  }
}

Tensor conv1d_impl(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor* bias, std::size_t stride) {
  const auto [batch, time, in_ch] = seq_dims(x, "conv1d");
  require_rank(kernels, 3, "conv1d");
  const auto k = kernels.dim(0), out_ch = kernels.dim(2);
  if (kernels.dim(1) != in_ch) {
    throw std::invalid_argument("conv1d: kernel " + shape_str(kernels.shape()) + " does not match input " +
                                shape_str(x.shape()));
  }
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be >= 1");
  if (k > time) {
    throw std::invalid_argument("conv1d: kernel length " + std::to_string(k) + " exceeds input length " +
                                std::to_string(time));
  }
  if (bias && bias->numel() != out_ch) {
    throw std::invalid_argument("conv1d: bias " + shape_str(bias->shape()) + " does not match " +
                                std::to_string(out_ch) + " output channels");
  }
  const auto t_out = (time - k) / stride + 1;
  const auto patch = k * in_ch;

  auto build_cols = [time, in_ch, stride, t_out, patch](std::span<const double> xv, std::size_t b, RowMat& cols) {
    im2col(xv, b, time, in_ch, stride, t_out, patch, cols);
  };

  Tensor out(seq_shape(x, batch, t_out, out_ch));
  auto ov = out.mutable_values();
  auto kmat = as_matrix(kernels.values(), patch, out_ch);
  RowMat cols(static_cast<Eigen::Index>(t_out), static_cast<Eigen::Index>(patch));
  for (std::size_t b = 0; b < batch; ++b) {
    build_cols(x.values(), b, cols);
    auto o = MutMap(ov.data() + b * t_out * out_ch, static_cast<Eigen::Index>(t_out),
                    static_cast<Eigen::Index>(out_ch));
    o.noalias() = cols * kmat;
    if (bias) o.rowwise() += as_matrix(bias->values(), 1, out_ch).row(0);
  }

  const bool bias_grad = bias && bias->requires_grad();
  if (tape.should_record({&x, &kernels}) || (tape.recording() && bias_grad)) {
    Tensor bias_t = bias ? *bias : Tensor();
    std::vector<Tensor> inputs{x, kernels};
    if (bias) inputs.push_back(bias_t);
    tape.record(std::move(inputs), out,
                [x, kernels, bias_t, out, batch, time, in_ch, out_ch, t_out, stride, patch]() mutable {
                  auto g = out.grad();
                  auto kmat = as_matrix(kernels.values(), patch, out_ch);
                  RowMat cols(static_cast<Eigen::Index>(t_out), static_cast<Eigen::Index>(patch));
                  for (std::size_t b = 0; b < batch; ++b) {
                    auto gb = as_matrix(g.subspan(b * t_out * out_ch, t_out * out_ch), t_out, out_ch);
                    if (kernels.requires_grad()) {
                      im2col(x.values(), b, time, in_ch, stride, t_out, patch, cols);
                      as_matrix(kernels.mutable_grad(), patch, out_ch).noalias() += cols.transpose() * gb;
                    }
                    if (x.requires_grad()) {
                      RowMat gcols = gb * kmat.transpose();
                      auto gx = x.mutable_grad();
                      for (std::size_t t = 0; t < t_out; ++t) {
                        double* dst = gx.data() + (b * time + t * stride) * in_ch;
                        const double* src = gcols.row(static_cast<Eigen::Index>(t)).data();
                        for (std::size_t i = 0; i < patch; ++i) dst[i] += src[i];
                      }
                    }
                    if (bias_t.defined() && bias_t.requires_grad()) {
                      as_matrix(bias_t.mutable_grad(), 1, out_ch) += gb.colwise().sum();
                    }
                  }
                });
  }
  return out;
}

}  // namespace

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernels, std::size_t stride) {
  return conv1d_impl(tape, x, kernels, nullptr, stride);
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  return conv1d_impl(tape, x, kernels, &bias, stride);
}

Tensor max_pool1d(Tape& tape, const Tensor& x, std::size_t window) {
  const auto [batch, time, ch] = seq_dims(x, "max_pool1d");
  if (window == 0) throw std::invalid_argument("max_pool1d: window must be >= 1");
  const auto t_out = time / window;
  if (t_out == 0) {
    throw std::invalid_argument("max_pool1d: window " + std::to_string(window) + " longer than input length " +
                                std::to_string(time));
  }
  Tensor out(seq_shape(x, batch, t_out, ch));
  std::vector<std::size_t> argmax(batch * t_out * ch);
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t best = (b * time + t * window) * ch + c;
        for (std::size_t w = 1; w < window; ++w) {
          const auto idx = (b * time + t * window + w) * ch + c;
          if (xv[idx] > xv[best]) best = idx;
        }
        const auto o = (b * t_out + t) * ch + c;
        ov[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, argmax = std::move(argmax)]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0) throw std::invalid_argument("layer_norm: scalar input");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  const auto n = x.shape().back();
  if (gain.numel() != n || bias.numel() != n) {
    throw std::invalid_argument("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                                shape_str(bias.shape()) + " do not match last axis of " + shape_str(x.shape()));
  }
  const auto rows = x.numel() / n;
  Tensor out(x.shape());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (row[i] - mu) * is;
      xhat[r * n + i] = h;
      ov[r * n + i] = h * gv[i] + bv[i];
    }
  }
  if (tape.should_record({&x, &gain, &bias})) {
    tape.record({x, gain, bias},
                out, [x, gain, bias, out, n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
                  auto g = out.grad();
                  auto gv = gain.values();
                  if (gain.requires_grad()) {
                    auto gg = gain.mutable_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t i = 0; i < n; ++i) gg[i] += g[r * n + i] * xhat[r * n + i];
                  }
                  if (bias.requires_grad()) {
                    auto gb = bias.mutable_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t i = 0; i < n; ++i) gb[i] += g[r * n + i];
                  }
                  if (x.requires_grad()) {
                    auto gx = x.mutable_grad();
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_dh = 0.0, mean_dh_h = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        const double dh = g[r * n + i] * gv[i];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat[r * n + i];
                      }
                      mean_dh *= inv_n;
                      mean_dh_h *= inv_n;
                      for (std::size_t i = 0; i < n; ++i) {
                        const double dh = g[r * n + i] * gv[i];
                        gx[r * n + i] += inv_std[r] * (dh - mean_dh - xhat[r * n + i] * mean_dh_h);
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? keep_scale : 0.0;
  Tensor out(x.shape());
  auto xv = x.values();
  auto ov = out.mutable_values();
  for (std::size_t i = 0; i < mask.size(); ++i) ov[i] = xv[i] * mask[i];
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, mask = std::move(mask)]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

}  // namespace mpd::diff
