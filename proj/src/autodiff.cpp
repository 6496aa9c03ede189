#include "metaland/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>

#include "metaland/errors.hpp"

namespace metaland {

namespace {

using NodeId = const detail::Node*;

struct Frame {
  Tensor tensor;
  std::size_t next_parent = 0;
};

}  // namespace

std::vector<Tensor> gradient(const Tensor& loss, std::span<const Tensor> wrt, bool create_graph) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ValidationError("gradient: loss must be a scalar, got " +
                          (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }
  std::unordered_set<NodeId> targets;
  for (const auto& t : wrt) targets.insert(t.id());

  // Post-order over tracked nodes; a node is relevant when some target is reachable from it.
  std::vector<Tensor> order;
  std::unordered_map<NodeId, bool> relevant;
  if (loss.requires_grad()) {
    std::vector<Frame> stack{{loss, 0}};
    relevant[loss.id()] = false;
    while (!stack.empty()) {
      auto& top = stack.back();
      const auto& parents = top.tensor.parents();
      if (top.next_parent < parents.size()) {
        const Tensor& p = parents[top.next_parent++];
        if (p.requires_grad() && !relevant.contains(p.id())) {
          relevant[p.id()] = false;
          stack.push_back({p, 0});
        }
        continue;
      }
      bool rel = targets.contains(top.tensor.id());
      for (const auto& p : parents) rel = rel || (p.requires_grad() && relevant[p.id()]);
      relevant[top.tensor.id()] = rel;
      order.push_back(top.tensor);
      stack.pop_back();
    }
  }

  std::unordered_map<NodeId, Tensor> grads;
  if (!order.empty()) grads[loss.id()] = Tensor::full(loss.shape(), 1.0);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& node = *it;
    if (!relevant[node.id()] || !node.has_record()) continue;
    auto found = grads.find(node.id());
    if (found == grads.end()) continue;
    const auto& parents = node.parents();
    std::vector<bool> needs(parents.size());
    bool any = false;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      needs[i] = parents[i].requires_grad() && relevant[parents[i].id()];
      any = any || needs[i];
    }
    if (!any) continue;

    std::vector<Tensor> parent_grads;
    if (create_graph) {
      parent_grads = node.backward_fn()(node, found->second, parents, needs);
    } else {
      std::vector<Tensor> inputs;
      inputs.reserve(parents.size());
      for (const auto& p : parents) inputs.push_back(p.detach());
      parent_grads = node.backward_fn()(node.detach(), found->second.detach(), inputs, needs);
    }
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (!needs[i]) continue;
      auto [slot, inserted] = grads.try_emplace(parents[i].id(), parent_grads[i]);
      if (!inserted) slot->second = add(slot->second, parent_grads[i]);
    }
    // Gradients of interior non-target nodes are no longer needed.
    if (!targets.contains(node.id())) grads.erase(found);
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& t : wrt) {
    auto found = grads.find(t.id());
    out.push_back(found != grads.end() ? found->second : Tensor::zeros(t.shape()));
  }
  return out;
}

ParamSet gradient(const Tensor& loss, const ParamSet& params, bool create_graph) {
  auto tensors = params.tensors();
  return params.with_tensors(gradient(loss, tensors, create_graph));
}

MetaGradient gradient_through_update(const ParamSet& theta, const LossFn& support, const LossFn& query,
                                     double alpha, int steps, bool second_order) {
  if (steps < 1) throw ValidationError("gradient_through_update: inner steps must be >= 1");
  if (alpha < 0.0) throw ValidationError("gradient_through_update: step size must be non-negative");
  const ParamSet start = theta.as_leaves();
  ParamSet phi = start;
  for (int s = 0; s < steps; ++s) {
    if (!second_order) phi = phi.detached().as_leaves();
    auto g = gradient(support(phi), phi, second_order);
    phi = descend(phi, g, alpha);
  }
  MetaGradient result;
  if (second_order) {
    auto loss = query(phi);
    result.query_loss = loss.item();
    result.grads = gradient(loss, start, false);
  } else {
    auto phi_leaf = phi.detached().as_leaves();
    auto loss = query(phi_leaf);
    result.query_loss = loss.item();
    result.grads = gradient(loss, phi_leaf, false);
  }
  result.adapted = phi.detached();
  return result;
}

}  // namespace metaland
