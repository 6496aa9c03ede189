#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metaland/param_set.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

/// Reverse-mode gradients of a scalar `loss` with respect to `wrt`.
///
/// Tensors not reached from `loss` receive zeros. With `create_graph` the returned
/// gradients carry their own differentiation record and can be differentiated again.
std::vector<Tensor> gradient(const Tensor& loss, std::span<const Tensor> wrt, bool create_graph = false);

/// ParamSet form of gradient(); the result has the layout of `params`.
ParamSet gradient(const Tensor& loss, const ParamSet& params, bool create_graph = false);

using LossFn = std::function<Tensor(const ParamSet&)>;

struct MetaGradient {
  ParamSet grads;    // d query_loss(adapted) / d theta
  ParamSet adapted;  // phi after the inner steps (detached)
  double query_loss = 0.0;
};

/// Runs `steps` plain gradient-descent steps on `support` starting at `theta`, then
/// differentiates `query` at the adapted parameters back to `theta`.
///
/// With `second_order` the inner updates are recorded and the returned gradient
/// includes their Jacobians. Otherwise the query gradient is taken at phi and
/// treated as the gradient at theta (first-order approximation).
MetaGradient gradient_through_update(const ParamSet& theta, const LossFn& support, const LossFn& query,
                                     double alpha, int steps, bool second_order = true);

}  // namespace metaland
