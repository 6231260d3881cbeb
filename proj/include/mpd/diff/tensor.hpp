#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mpd::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Use clone() for
/// an independent copy. Gradients are allocated lazily on first accumulation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  // Gradient storage is accumulation state, writable through any handle.
  std::span<double> mutable_grad() const;
  void zero_grad();
  void drop_grad() const;

  Tensor clone() const;
  /// Same values, fresh storage, no gradient tracking.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  Impl& impl() const;
};

/// Ordered record of primitive operations for one forward pass.
///
/// Ops append nodes only when the tape is recording and at least one input
/// requires a gradient. Nodes are appended after their inputs exist, so the
/// record is topologically ordered by construction and backward() is a single
/// reverse sweep.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return mode_ == Mode::record; }
  bool should_record(std::initializer_list<const Tensor*> inputs) const;

  /// `backprop` reads the output gradient and accumulates into the inputs.
  void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backprop);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the record in reverse. Leaf
  /// gradients accumulate across calls; intermediate gradients are reset.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backprop;
  };
  Mode mode_;
  std::vector<Node> nodes_;
};

}  // namespace mpd::diff
