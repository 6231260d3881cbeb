#include "mpd/diff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mpd::diff {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<Impl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " holds " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::values() const { return impl().data; }

std::span<double> Tensor::mutable_values() { return impl().data; }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

double Tensor::at(std::size_t i) const { return impl().data.at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw std::invalid_argument("at(row, col) on tensor of shape " + shape_str(shape()));
  return impl().data.at(row * shape()[1] + col);
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl().grad; }

std::span<double> Tensor::mutable_grad() const {
  auto& d = impl();
  if (d.grad.empty()) d.grad.assign(d.data.size(), 0.0);
  return d.grad;
}

void Tensor::zero_grad() {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::drop_grad() const { impl().grad.clear(); }

Tensor Tensor::clone() const {
  Tensor out(shape(), impl().data);
  out.impl_->requires_grad = impl().requires_grad;
  out.impl_->grad = impl().grad;
  return out;
}

Tensor Tensor::detach() const { return Tensor(shape(), impl().data); }

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backprop) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backprop)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward() on a loss that is not connected to any gradient-tracking input");
  }
  for (auto& node : nodes_) node.output.drop_grad();
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->backprop();
  }
}

}  // namespace mpd::diff
