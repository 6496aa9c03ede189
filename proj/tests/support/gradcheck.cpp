#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "metaland/autodiff.hpp"
#include "metaland/models.hpp"
#include "metaland/rng.hpp"

namespace metaland::testing {

namespace {

constexpr double kFloor = 1e-6;

std::vector<double> normal_values(std::size_t count, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(count);
  for (auto& x : v) x = n(rng);
  return v;
}

// Keeps entries away from 0 so that a finite-difference step never crosses a ReLU kink.
std::vector<double> away_from_zero(std::size_t, std::size_t count, Rng& rng) {
  auto v = normal_values(count, rng);
  for (auto& x : v) x = std::copysign(std::abs(x) + 0.05, x);
  return v;
}

std::vector<double> positive(std::size_t, std::size_t count, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> v(count);
  for (auto& x : v) x = u(rng);
  return v;
}

// Distinct values spaced >= 0.01 apart, shuffled, so pooling windows have a clear maximum.
std::vector<double> well_separated(std::size_t, std::size_t count, Rng& rng) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = 0.01 * static_cast<double>(i) - 0.005 * static_cast<double>(count);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

std::shared_ptr<const std::vector<std::int64_t>> indices(std::vector<std::int64_t> v) {
  return std::make_shared<const std::vector<std::int64_t>>(std::move(v));
}

struct Drawn {
  std::vector<Tensor> leaves;
  Tensor weights;
};

Drawn draw_inputs(const OpCase& op, Rng& rng) {
  Drawn d;
  for (std::size_t i = 0; i < op.inputs.size(); ++i) {
    const auto n = static_cast<std::size_t>(numel(op.inputs[i]));
    auto values = op.draw ? op.draw(i, n, rng) : normal_values(n, rng);
    d.leaves.push_back(Tensor::from_data(op.inputs[i], std::move(values)).as_leaf());
  }
  const auto out = op.fn(d.leaves);
  d.weights = Tensor::from_data(out.shape(), normal_values(static_cast<std::size_t>(out.numel()), rng));
  return d;
}

double weighted_value(const OpCase& op, const std::vector<Tensor>& inputs, const Tensor& weights) {
  const auto out = op.fn(inputs);
  return out.vec().dot(weights.vec());
}

std::vector<Tensor> perturbed(const std::vector<Tensor>& base, std::size_t which, std::size_t entry, double delta) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> v(base[i].data().begin(), base[i].data().end());
    if (i == which) v[entry] += delta;
    out.push_back(Tensor::from_data(base[i].shape(), std::move(v)));
  }
  return out;
}

double entry_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kFloor}); }

}  // namespace

std::vector<OpCase> all_op_cases() {
  auto labels = [](std::vector<int> l) { return std::make_shared<const std::vector<int>>(std::move(l)); };
  const auto mask = std::make_shared<const std::vector<double>>(std::vector<double>{0.5, -1.0, 2.0, 0.0, 3.0, -0.25});
  const auto ce_labels = labels({2, 0, 1, 2});
  const auto px_labels = labels({0, 2, 1, 1, 2, 2, 0, 1});
  const auto scatter_at = indices({11, 0, 5, 7, 2, 9});

  std::vector<OpCase> c;
  c.push_back({"add", {{2, 3}, {2, 3}}, [](const auto& x) { return add(x[0], x[1]); }, {}});
  c.push_back({"sub", {{2, 3}, {2, 3}}, [](const auto& x) { return sub(x[0], x[1]); }, {}});
  c.push_back({"mul", {{2, 3}, {2, 3}}, [](const auto& x) { return mul(x[0], x[1]); }, {}});
  c.push_back({"mul_self", {{2, 3}}, [](const auto& x) { return mul(x[0], x[0]); }, {}});
  c.push_back({"neg", {{2, 3}}, [](const auto& x) { return neg(x[0]); }, {}});
  c.push_back({"scale", {{2, 3}}, [](const auto& x) { return scale(x[0], -1.7); }, {}});
  c.push_back({"add_scalar", {{2, 3}}, [](const auto& x) { return add_scalar(x[0], 0.3); }, {}});
  c.push_back({"pow_scalar", {{2, 3}}, [](const auto& x) { return pow_scalar(x[0], 2.5); }, positive});
  c.push_back({"pow_scalar_neg", {{2, 3}}, [](const auto& x) { return pow_scalar(x[0], -0.5); }, positive});
  c.push_back({"exp", {{2, 3}}, [](const auto& x) { return metaland::exp(x[0]); }, {}});
  c.push_back({"mul_const", {{2, 3}}, [mask](const auto& x) { return mul_const(x[0], mask); }, {}});
  c.push_back({"relu", {{2, 3, 2}}, [](const auto& x) { return relu(x[0]); }, away_from_zero});
  c.push_back({"reshape", {{2, 3}}, [](const auto& x) { return mul(reshape(x[0], {3, 2}), reshape(x[0], {3, 2})); }, {}});
  c.push_back({"sum", {{2, 3}}, [](const auto& x) { return sum(mul(x[0], x[0])); }, {}});
  c.push_back({"mean", {{2, 3}}, [](const auto& x) { return mean(mul(x[0], x[0])); }, {}});
  c.push_back({"expand_scalar", {{}}, [](const auto& x) { return expand_scalar(x[0], {2, 3}); }, {}});
  c.push_back({"channel_sum", {{2, 3, 2, 2}}, [](const auto& x) { return channel_sum(x[0]); }, {}});
  c.push_back({"channel_expand", {{3}}, [](const auto& x) { return channel_expand(x[0], {2, 3, 2, 2}); }, {}});
  c.push_back({"axis1_sum", {{2, 3, 4}}, [](const auto& x) { return axis1_sum(x[0]); }, {}});
  c.push_back({"axis1_expand", {{2, 1, 4}}, [](const auto& x) { return axis1_expand(x[0], 3); }, {}});
  c.push_back({"log_softmax", {{3, 5}}, [](const auto& x) { return log_softmax(x[0]); }, {}});
  c.push_back({"log_softmax_4d", {{2, 4, 2, 2}}, [](const auto& x) { return log_softmax(x[0]); }, {}});
  c.push_back({"matmul", {{3, 4}, {4, 2}}, [](const auto& x) { return matmul(x[0], x[1]); }, {}});
  c.push_back({"transpose", {{3, 4}}, [](const auto& x) { return transpose(x[0]); }, {}});
  c.push_back({"conv2d", {{2, 2, 4, 4}, {3, 2, 3, 3}}, [](const auto& x) { return conv2d(x[0], x[1]); }, {}});
  c.push_back({"conv2d_bias", {{2, 2, 4, 4}, {3, 2, 3, 3}, {3}},
               [](const auto& x) { return conv2d(x[0], x[1], x[2]); }, {}});
  c.push_back({"conv2d_1x1", {{1, 3, 3, 3}, {2, 3, 1, 1}}, [](const auto& x) { return conv2d(x[0], x[1]); }, {}});
  c.push_back({"conv2d_5x5", {{1, 2, 3, 4}, {2, 2, 5, 5}}, [](const auto& x) { return conv2d(x[0], x[1]); }, {}});
  c.push_back({"conv2d_input_grad", {{2, 3, 4, 4}, {3, 2, 3, 3}},
               [](const auto& x) { return conv2d_input_grad(x[0], x[1]); }, {}});
  c.push_back({"conv2d_kernel_grad", {{2, 2, 4, 4}, {2, 3, 4, 4}},
               [](const auto& x) { return conv2d_kernel_grad(x[0], x[1], 3); }, {}});
  c.push_back({"maxpool2d", {{2, 2, 4, 4}}, [](const auto& x) { return maxpool2d(x[0]); }, well_separated});
  c.push_back({"index_scatter", {{6}},
               [scatter_at](const auto& x) { return index_scatter(x[0], scatter_at, {12}); }, {}});
  c.push_back({"index_gather", {{12}},
               [scatter_at](const auto& x) { return index_gather(x[0], scatter_at, {6}); }, {}});
  c.push_back({"upsample2d", {{2, 2, 2, 3}}, [](const auto& x) { return upsample2d(x[0]); }, {}});
  c.push_back({"sumpool2d", {{2, 2, 4, 6}}, [](const auto& x) { return sumpool2d(x[0]); }, {}});
  c.push_back({"concat_channels", {{2, 2, 3, 3}, {2, 3, 3, 3}},
               [](const auto& x) { return concat_channels(x[0], x[1]); }, {}});
  c.push_back({"slice_channels", {{2, 5, 2, 2}}, [](const auto& x) { return slice_channels(x[0], 1, 3); }, {}});
  c.push_back({"pad_channels", {{2, 2, 2, 2}}, [](const auto& x) { return pad_channels(x[0], 1, 5); }, {}});
  c.push_back({"batchnorm2d", {{3, 2, 2, 2}, {2}, {2}},
               [](const auto& x) { return batchnorm2d(x[0], x[1], x[2]); }, {}});
  c.push_back({"softmax_cross_entropy", {{4, 3}},
               [ce_labels](const auto& x) { return softmax_cross_entropy(x[0], *ce_labels); }, {}});
  c.push_back({"softmax_cross_entropy_4d", {{2, 3, 2, 2}},
               [px_labels](const auto& x) { return softmax_cross_entropy(x[0], *px_labels); }, {}});
  c.push_back({"conv_block",
               // The conv bias is not an input here: batchnorm cancels it, so its gradient is
               // identically zero and central differences only see roundoff.
               {{2, 2, 4, 4}, {3, 2, 3, 3}, {3}, {3}},
               [](const auto& x) {
                 ParamSet p;
                 p.add("b.conv.weight", x[1]);
                 p.add("b.conv.bias", Tensor::from_data({3}, {0.3, -0.2, 0.1}));
                 p.add("b.bn.gamma", x[2]);
                 p.add("b.bn.beta", x[3]);
                 return maxpool2d(conv_block(p, "b", x[0]));
               },
               {}});
  return c;
}

double max_relative_error(const OpCase& op, std::uint64_t seed, double h) {
  Rng rng(seed);
  const auto d = draw_inputs(op, rng);
  const auto loss = sum(mul(op.fn(d.leaves), d.weights));
  const auto analytic = gradient(loss, d.leaves);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.leaves.size(); ++i) {
    for (std::int64_t j = 0; j < d.leaves[i].numel(); ++j) {
      const auto e = static_cast<std::size_t>(j);
      const double up = weighted_value(op, perturbed(d.leaves, i, e, h), d.weights);
      const double down = weighted_value(op, perturbed(d.leaves, i, e, -h), d.weights);
      worst = std::max(worst, entry_error(analytic[i].at(j), (up - down) / (2 * h)));
    }
  }
  return worst;
}

double hessian_vector_error(const OpCase& op, std::uint64_t seed, double h) {
  Rng rng(seed);
  const auto d = draw_inputs(op, rng);
  std::vector<Tensor> v;
  for (const auto& leaf : d.leaves) {
    v.push_back(Tensor::from_data(leaf.shape(), normal_values(static_cast<std::size_t>(leaf.numel()), rng)));
  }
  auto directional = [&](const std::vector<Tensor>& inputs, bool create_graph) {
    const auto loss = sum(mul(op.fn(inputs), d.weights));
    const auto g = gradient(loss, inputs, create_graph);
    Tensor s = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < g.size(); ++i) s = add(s, sum(mul(g[i], v[i])));
    return s;
  };
  const auto hv = gradient(directional(d.leaves, true), d.leaves);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.leaves.size(); ++i) {
    for (std::int64_t j = 0; j < d.leaves[i].numel(); ++j) {
      const auto e = static_cast<std::size_t>(j);
      auto leafify = [](std::vector<Tensor> t) {
        for (auto& x : t) x = x.as_leaf();
        return t;
      };
      const double up = directional(leafify(perturbed(d.leaves, i, e, h)), false).item();
      const double down = directional(leafify(perturbed(d.leaves, i, e, -h)), false).item();
      worst = std::max(worst, entry_error(hv[i].at(j), (up - down) / (2 * h)));
    }
  }
  return worst;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) worst = std::max(worst, entry_error(analytic[i], numeric[i]));
  return worst;
}

double quadratic_meta_gradient(const QuadraticTask& task, double theta, double alpha, bool second_order) {
  ParamSet p;
  p.add("p", Tensor::scalar(theta));
  auto loss_about = [](double center) {
    return [center](const ParamSet& q) { return scale(pow_scalar(add_scalar(q[0], -center), 2.0), 0.5); };
  };
  const auto meta = gradient_through_update(p, loss_about(task.support_center), loss_about(task.query_center), alpha, 1,
                                            second_order);
  return meta.grads[0].item();
}

double tiny_cnn_meta_gradient_error(std::uint64_t seed, int inner_steps) {
  CnnConfig cfg;
  cfg.in_channels = 2;
  cfg.num_classes = 3;
  cfg.input_size = 4;
  cfg.width = 3;
  cfg.depth = 2;
  const auto theta = build_cnn(cfg, seed);
  Rng rng(derive_seed(seed, "tiny-cnn/batch"));
  const auto support_x = Tensor::from_data({6, 2, 4, 4}, normal_values(6 * 2 * 16, rng));
  const auto query_x = Tensor::from_data({6, 2, 4, 4}, normal_values(6 * 2 * 16, rng));
  const std::vector<int> support_y{0, 1, 2, 0, 1, 2};
  const std::vector<int> query_y{2, 2, 1, 0, 0, 1};
  const LossFn support = [&](const ParamSet& p) { return softmax_cross_entropy(forward(p, support_x), support_y); };
  const LossFn query = [&](const ParamSet& p) { return softmax_cross_entropy(forward(p, query_x), query_y); };
  const double alpha = 0.3;

  const auto meta = gradient_through_update(theta, support, query, alpha, inner_steps, true);
  auto adapted_query_loss = [&](const Eigen::VectorXd& flat) {
    ParamSet phi = unflatten_params(theta, flat);
    for (int s = 0; s < inner_steps; ++s) {
      const auto leaves = phi.as_leaves();
      phi = descend(leaves.detached(), gradient(support(leaves), leaves), alpha);
    }
    return query(phi).item();
  };
  const auto numeric = numeric_gradient(adapted_query_loss, flatten_params(theta));
  return relative_error(flatten_params(meta.grads), numeric);
}

}  // namespace metaland::testing
