#include <cmath>

#include "metaland/errors.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

namespace {

using Grads = std::vector<Tensor>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

template <typename F>
std::vector<double> map_values(const Tensor& a, F f) {
  auto src = a.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return out;
}

template <typename F>
std::vector<double> zip_values(const Tensor& a, const Tensor& b, F f) {
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

struct Axis1View {
  std::int64_t outer, mid, inner;
};

Axis1View axis1_view(const Shape& shape, const char* op) {
  if (shape.size() < 2) {
    throw DimensionError(std::string(op) + ": needs at least 2 axes, got " + to_string(shape));
  }
  std::int64_t inner = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) inner *= shape[i];
  return {shape[0], shape[1], inner};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::make_result(
      a.shape(), zip_values(a, b, [](double x, double y) { return x + y; }), {a, b},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {g, g};
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::make_result(
      a.shape(), zip_values(a, b, [](double x, double y) { return x - y; }), {a, b},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>& needs) -> Grads {
        return {g, needs[1] ? neg(g) : Tensor()};
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return Tensor::make_result(
      a.shape(), zip_values(a, b, [](double x, double y) { return x * y; }), {a, b},
      [](const Tensor&, const Tensor& g, const Grads& in, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? mul(g, in[1]) : Tensor(), needs[1] ? mul(g, in[0]) : Tensor()};
      },
      "mul");
}

Tensor neg(const Tensor& a) {
  return Tensor::make_result(
      a.shape(), map_values(a, [](double x) { return -x; }), {a},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {neg(g)};
      },
      "neg");
}

Tensor scale(const Tensor& a, double factor) {
  return Tensor::make_result(
      a.shape(), map_values(a, [factor](double x) { return x * factor; }), {a},
      [factor](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {scale(g, factor)};
      },
      "scale");
}

Tensor add_scalar(const Tensor& a, double value) {
  return Tensor::make_result(
      a.shape(), map_values(a, [value](double x) { return x + value; }), {a},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {g};
      },
      "add_scalar");
}

Tensor pow_scalar(const Tensor& a, double exponent) {
  return Tensor::make_result(
      a.shape(), map_values(a, [exponent](double x) { return std::pow(x, exponent); }), {a},
      [exponent](const Tensor&, const Tensor& g, const Grads& in, const std::vector<bool>&) -> Grads {
        if (exponent == 1.0) return {g};
        return {mul(g, scale(pow_scalar(in[0], exponent - 1.0), exponent))};
      },
      "pow_scalar");
}

Tensor exp(const Tensor& a) {
  return Tensor::make_result(
      a.shape(), map_values(a, [](double x) { return std::exp(x); }), {a},
      [](const Tensor& self, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {mul(g, self)};
      },
      "exp");
}

Tensor mul_const(const Tensor& a, std::shared_ptr<const std::vector<double>> factor) {
  if (static_cast<std::int64_t>(factor->size()) != a.numel()) {
    throw DimensionError("mul_const: factor length " + std::to_string(factor->size()) +
                         " does not match shape " + to_string(a.shape()));
  }
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (*factor)[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a},
      [factor](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {mul_const(g, factor)};
      },
      "mul_const");
}

Tensor relu(const Tensor& a) {
  auto x = a.data();
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Subgradient at 0 is 0.
    (*mask)[i] = x[i] > 0.0 ? 1.0 : 0.0;
    out[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
  std::shared_ptr<const std::vector<double>> frozen = mask;
  return Tensor::make_result(
      a.shape(), std::move(out), {a},
      [frozen](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {mul_const(g, frozen)};
      },
      "relu");
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  auto data = a.data();
  Shape original = a.shape();
  return Tensor::make_result(
      shape, std::vector<double>(data.begin(), data.end()), {a},
      [original](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {reshape(g, original)};
      },
      "reshape");
}

// ---- reductions ---------------------------------------------------------

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Shape shape = a.shape();
  return Tensor::make_result(
      {}, {total}, {a},
      [shape](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {expand_scalar(g, shape)};
      },
      "sum");
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor expand_scalar(const Tensor& s, const Shape& shape) {
  if (s.numel() != 1) throw DimensionError("expand_scalar: source " + to_string(s.shape()) + " is not scalar");
  return Tensor::make_result(
      shape, std::vector<double>(static_cast<std::size_t>(numel(shape)), s.item()), {s},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {sum(g)};
      },
      "expand_scalar");
}

Tensor channel_sum(const Tensor& a) {
  auto v = axis1_view(a.shape(), "channel_sum");
  auto x = a.data();
  std::vector<double> out(static_cast<std::size_t>(v.mid), 0.0);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t c = 0; c < v.mid; ++c) {
      const double* row = x.data() + (o * v.mid + c) * v.inner;
      double acc = 0.0;
      for (std::int64_t i = 0; i < v.inner; ++i) acc += row[i];
      out[static_cast<std::size_t>(c)] += acc;
    }
  }
  Shape shape = a.shape();
  return Tensor::make_result(
      {v.mid}, std::move(out), {a},
      [shape](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {channel_expand(g, shape)};
      },
      "channel_sum");
}

Tensor channel_expand(const Tensor& v, const Shape& shape) {
  auto view = axis1_view(shape, "channel_expand");
  if (v.ndim() != 1 || v.dim(0) != view.mid) {
    throw DimensionError("channel_expand: vector " + to_string(v.shape()) +
                         " does not match channels of " + to_string(shape));
  }
  auto x = v.data();
  std::vector<double> out(static_cast<std::size_t>(numel(shape)));
  for (std::int64_t o = 0; o < view.outer; ++o) {
    for (std::int64_t c = 0; c < view.mid; ++c) {
      double* row = out.data() + (o * view.mid + c) * view.inner;
      std::fill(row, row + view.inner, x[static_cast<std::size_t>(c)]);
    }
  }
  return Tensor::make_result(
      shape, std::move(out), {v},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {channel_sum(g)};
      },
      "channel_expand");
}

Tensor axis1_sum(const Tensor& a) {
  auto v = axis1_view(a.shape(), "axis1_sum");
  auto x = a.data();
  std::vector<double> out(static_cast<std::size_t>(v.outer * v.inner), 0.0);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    double* dst = out.data() + o * v.inner;
    for (std::int64_t c = 0; c < v.mid; ++c) {
      const double* row = x.data() + (o * v.mid + c) * v.inner;
      for (std::int64_t i = 0; i < v.inner; ++i) dst[i] += row[i];
    }
  }
  Shape shape = a.shape();
  shape[1] = 1;
  const std::int64_t count = v.mid;
  return Tensor::make_result(
      shape, std::move(out), {a},
      [count](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {axis1_expand(g, count)};
      },
      "axis1_sum");
}

Tensor axis1_expand(const Tensor& a, std::int64_t count) {
  auto v = axis1_view(a.shape(), "axis1_expand");
  if (v.mid != 1) throw DimensionError("axis1_expand: axis 1 must have extent 1, got " + to_string(a.shape()));
  auto x = a.data();
  Shape shape = a.shape();
  shape[1] = count;
  std::vector<double> out(static_cast<std::size_t>(numel(shape)));
  for (std::int64_t o = 0; o < v.outer; ++o) {
    const double* src = x.data() + o * v.inner;
    for (std::int64_t c = 0; c < count; ++c) {
      std::copy(src, src + v.inner, out.data() + (o * count + c) * v.inner);
    }
  }
  return Tensor::make_result(
      shape, std::move(out), {a},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {axis1_sum(g)};
      },
      "axis1_expand");
}

Tensor log_softmax(const Tensor& logits) {
  auto v = axis1_view(logits.shape(), "log_softmax");
  auto x = logits.data();
  std::vector<double> out(x.size());
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      auto at = [&](std::int64_t c) { return (o * v.mid + c) * v.inner + i; };
      double peak = x[static_cast<std::size_t>(at(0))];
      for (std::int64_t c = 1; c < v.mid; ++c) peak = std::max(peak, x[static_cast<std::size_t>(at(c))]);
      double total = 0.0;
      for (std::int64_t c = 0; c < v.mid; ++c) total += std::exp(x[static_cast<std::size_t>(at(c))] - peak);
      const double log_norm = peak + std::log(total);
      for (std::int64_t c = 0; c < v.mid; ++c) {
        out[static_cast<std::size_t>(at(c))] = x[static_cast<std::size_t>(at(c))] - log_norm;
      }
    }
  }
  const std::int64_t classes = v.mid;
  return Tensor::make_result(
      logits.shape(), std::move(out), {logits},
      [classes](const Tensor& self, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {sub(g, mul(exp(self), axis1_expand(axis1_sum(g), classes)))};
      },
      "log_softmax");
}

// ---- linear algebra -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Eigen::Map<const RowMat> lhs(a.data().data(), m, k);
  Eigen::Map<const RowMat> rhs(b.data().data(), k, n);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  Eigen::Map<RowMat>(out.data(), m, n).noalias() = lhs * rhs;
  return Tensor::make_result(
      {m, n}, std::move(out), {a, b},
      [](const Tensor&, const Tensor& g, const Grads& in, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? matmul(g, transpose(in[1])) : Tensor(),
                needs[1] ? matmul(transpose(in[0]), g) : Tensor()};
      },
      "matmul");
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw DimensionError("transpose: expected a matrix, got " + to_string(a.shape()));
  const auto rows = a.dim(0), cols = a.dim(1);
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(c * rows + r)] = x[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return Tensor::make_result(
      {cols, rows}, std::move(out), {a},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {transpose(g)};
      },
      "transpose");
}

}  // namespace metaland
