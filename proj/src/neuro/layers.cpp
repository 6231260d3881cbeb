#include "mpd/neuro/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mpd/diff/ops.hpp"

namespace mpd::neuro {

Dense Dense::orthogonal(std::size_t in, std::size_t out, double gain, std::mt19937_64& rng) {
  const auto rows = static_cast<Eigen::Index>(std::max(in, out));
  const auto cols = static_cast<Eigen::Index>(std::min(in, out));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Sign fix makes the distribution uniform over orthogonal matrices.
  Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;

  Dense d;
  d.weight = diff::Tensor({in, out});
  d.bias = diff::Tensor({out});
  auto w = d.weight.mutable_values();
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      const double v = in >= out ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                 : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      w[i * out + j] = gain * v;
    }
  }
  return d;
}

Dense Dense::zeros(std::size_t in, std::size_t out) {
  return Dense{diff::Tensor({in, out}), diff::Tensor({out})};
}

void Dense::register_in(diff::ParameterList& params, const std::string& prefix) const {
  params.add(prefix + "weight", weight);
  params.add(prefix + "bias", bias);
}

diff::Tensor Dense::forward(diff::Tape& tape, const diff::Tensor& x) const {
  return diff::linear(tape, x, weight, bias);
}

TanhMlp TanhMlp::make(std::size_t in, const std::vector<std::size_t>& sizes, double gain, std::mt19937_64& rng) {
  TanhMlp mlp;
  for (auto width : sizes) {
    mlp.layers.push_back(Dense::orthogonal(in, width, gain, rng));
    in = width;
  }
  return mlp;
}

void TanhMlp::register_in(diff::ParameterList& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].register_in(params, prefix + std::to_string(i) + ".");
}

diff::Tensor TanhMlp::forward(diff::Tape& tape, const diff::Tensor& x) const {
  diff::Tensor h = x;
  for (const auto& layer : layers) h = diff::tanh(tape, layer.forward(tape, h));
  return h;
}

}  // namespace mpd::neuro
