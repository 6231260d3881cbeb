#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mpd/diff/tensor.hpp"

namespace mpd::diff {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered, named collection of trainable leaves. Order is registration order
/// and is what optimizers and checkpoints iterate over.
class ParameterList {
 public:
  /// Marks `t` as requiring gradients and appends it. Names must be unique.
  Tensor& add(std::string name, Tensor t);
  void append(const ParameterList& other, const std::string& prefix = "");

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  /// Copies values (not gradients) from a list with identical names and shapes.
  void copy_values_from(const ParameterList& other);
  /// Deep copy of every tensor, preserving names.
  ParameterList clone() const;

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace mpd::diff
