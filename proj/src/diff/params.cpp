#include "mpd/diff/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpd::diff {

Tensor& ParameterList::add(std::string name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  entries_.push_back(NamedTensor{std::move(name), std::move(t)});
  return entries_.back().tensor;
}

void ParameterList::append(const ParameterList& other, const std::string& prefix) {
  for (const auto& e : other.entries_) add(prefix + e.name, e.tensor);
}

std::size_t ParameterList::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

std::vector<Tensor> ParameterList::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor);
  return out;
}

const Tensor& ParameterList::at(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->tensor;
}

bool ParameterList::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

void ParameterList::zero_grad() {
  for (auto& e : entries_) e.tensor.drop_grad();
}

void ParameterList::copy_values_from(const ParameterList& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter lists differ in length");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i];
    const auto& src = other.entries_[i];
    if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape()) {
      throw std::invalid_argument("parameter mismatch at '" + dst.name + "' vs '" + src.name + "'");
    }
    auto sv = src.tensor.values();
    std::copy(sv.begin(), sv.end(), dst.tensor.mutable_values().begin());
  }
}

ParameterList ParameterList::clone() const {
  ParameterList out;
  for (const auto& e : entries_) out.add(e.name, e.tensor.detach());
  return out;
}

}  // namespace mpd::diff
