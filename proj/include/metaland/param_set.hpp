#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "metaland/tensor.hpp"

namespace metaland {

/// Named, ordered collection of model tensors. Order is fixed at construction.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParamSet() = default;

  /// Append an entry; names must be unique.
  void add(std::string name, Tensor tensor);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  const std::string& name(std::size_t i) const { return entries_.at(i).first; }
  const Tensor& operator[](std::size_t i) const { return entries_.at(i).second; }
  const Tensor& at(std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  /// Total number of scalar parameters.
  std::int64_t numel() const;
  std::vector<Tensor> tensors() const;

  /// Same names and shapes, in the same order.
  bool same_layout(const ParamSet& other) const;

  /// Fresh leaves that require gradients, sharing values with this set.
  ParamSet as_leaves() const;
  /// Values without any differentiation record.
  ParamSet detached() const;

  /// Rebuild a set with this layout from tensors given in entry order.
  ParamSet with_tensors(std::vector<Tensor> tensors) const;

 private:
  std::vector<Entry> entries_;
};

/// Concatenate all entries in order into one vector.
Eigen::VectorXd flatten_params(const ParamSet& params);
/// Inverse of flatten_params for the layout of `layout`.
ParamSet unflatten_params(const ParamSet& layout, const Eigen::Ref<const Eigen::VectorXd>& flat);

/// params - step * grads, entry by entry; differentiable in both arguments.
ParamSet descend(const ParamSet& params, const ParamSet& grads, double step);

}  // namespace metaland
