#include "metaland/param_set.hpp"

#include "metaland/errors.hpp"

namespace metaland {

void ParamSet::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  if (!tensor.defined()) throw ValidationError("parameter '" + name + "' is undefined");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor& ParamSet::at(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Tensor* ParamSet::find(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::int64_t ParamSet::numel() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) total += e.second.numel();
  return total;
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.shape() != other.entries_[i].second.shape()) {
      return false;
    }
  }
  return true;
}

ParamSet ParamSet::as_leaves() const {
  ParamSet out;
  for (const auto& [n, t] : entries_) out.entries_.emplace_back(n, t.as_leaf());
  return out;
}

ParamSet ParamSet::detached() const {
  ParamSet out;
  for (const auto& [n, t] : entries_) out.entries_.emplace_back(n, t.detach());
  return out;
}

ParamSet ParamSet::with_tensors(std::vector<Tensor> tensors) const {
  if (tensors.size() != entries_.size()) {
    throw DimensionError("with_tensors: " + std::to_string(tensors.size()) + " tensors for " +
                         std::to_string(entries_.size()) + " entries");
  }
  ParamSet out;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].shape() != entries_[i].second.shape()) {
      throw DimensionError("with_tensors: entry '" + entries_[i].first + "' expects " +
                           to_string(entries_[i].second.shape()) + ", got " + to_string(tensors[i].shape()));
    }
    out.entries_.emplace_back(entries_[i].first, std::move(tensors[i]));
  }
  return out;
}

Eigen::VectorXd flatten_params(const ParamSet& params) {
  Eigen::VectorXd flat(params.numel());
  Eigen::Index offset = 0;
  for (const auto& [name, t] : params) {
    flat.segment(offset, t.numel()) = t.vec();
    offset += t.numel();
  }
  return flat;
}

ParamSet unflatten_params(const ParamSet& layout, const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != layout.numel()) {
    throw DimensionError("unflatten_params: vector of length " + std::to_string(flat.size()) +
                         " for " + std::to_string(layout.numel()) + " parameters");
  }
  std::vector<Tensor> tensors;
  Eigen::Index offset = 0;
  for (const auto& [name, t] : layout) {
    std::vector<double> values(flat.data() + offset, flat.data() + offset + t.numel());
    tensors.push_back(Tensor::from_data(t.shape(), std::move(values)));
    offset += t.numel();
  }
  return layout.with_tensors(std::move(tensors));
}

ParamSet descend(const ParamSet& params, const ParamSet& grads, double step) {
  if (!params.same_layout(grads)) throw DimensionError("descend: gradient layout differs from parameters");
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(params[i] - scale(grads[i], step));
  return params.with_tensors(std::move(out));
}

}  // namespace metaland
