#pragma once

// Dense 64-bit tensors with a reverse-mode differentiation record.
//
// A Tensor is a cheap handle onto an immutable node. Nodes produced by a
// differentiable op keep their parents and a backward rule. Every backward
// rule is written in terms of the differentiable ops below, so a backward
// pass run with graph creation enabled is itself differentiable.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace metaland {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;

namespace detail {

// Receives the (possibly detached) node itself, the upstream gradient and the
// node's inputs; returns one gradient per input, left empty where `needs` is false.
using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& self, const Tensor& grad, const std::vector<Tensor>& inputs,
    const std::vector<bool>& needs)>;

struct Node {
  Shape shape;
  std::shared_ptr<const std::vector<double>> storage;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  BackwardFn backward;
  const char* op = "leaf";
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(const Shape& shape, std::vector<double> data);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t ndim() const { return shape().size(); }
  std::int64_t numel() const;
  std::span<const double> data() const;
  double item() const;
  double at(std::int64_t flat_index) const { return data()[static_cast<std::size_t>(flat_index)]; }

  Eigen::Map<const Eigen::VectorXd> vec() const;

  bool requires_grad() const;
  /// True when the tensor was produced by a recorded differentiable op.
  bool has_record() const;
  const char* op_name() const;

  /// Same values, no differentiation record.
  Tensor detach() const;
  /// Same values as a fresh leaf that requires gradients.
  Tensor as_leaf() const;

  /// Identity of the underlying node (equal handles share a node).
  const detail::Node* id() const noexcept { return node_.get(); }

  // Internal construction used by ops.
  static Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                            detail::BackwardFn backward, const char* op);
  const std::vector<Tensor>& parents() const;
  const detail::BackwardFn& backward_fn() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---- elementwise --------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor pow_scalar(const Tensor& a, double exponent);
Tensor exp(const Tensor& a);
/// Elementwise product with a constant (non-differentiable) factor of equal size.
Tensor mul_const(const Tensor& a, std::shared_ptr<const std::vector<double>> factor);
Tensor relu(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

// ---- reductions and broadcasts ------------------------------------------
//
// Axis-1 ops view a tensor of shape [d0, d1, d2, ...] as [outer=d0, mid=d1, inner=d2*...].

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Broadcast a scalar tensor to `shape`.
Tensor expand_scalar(const Tensor& s, const Shape& shape);
/// Sum over every axis except axis 1: [B, C, ...] -> [C].
Tensor channel_sum(const Tensor& a);
/// Broadcast v[C] along every axis except axis 1 of `shape`.
Tensor channel_expand(const Tensor& v, const Shape& shape);
/// Sum over axis 1 keeping it with extent 1.
Tensor axis1_sum(const Tensor& a);
/// Repeat an extent-1 axis 1 `count` times.
Tensor axis1_expand(const Tensor& a, std::int64_t count);
/// Numerically stable log-softmax over axis 1.
Tensor log_softmax(const Tensor& logits);

// ---- linear algebra -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- convolution family (stride 1, zero padding (K-1)/2, odd square K) --

Tensor conv2d(const Tensor& input, const Tensor& kernel);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
/// Gradient of sum(G * conv2d(x, w)) w.r.t. x, evaluated for upstream G.
Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernel);
/// Gradient of sum(G * conv2d(x, w)) w.r.t. w.
Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_out, std::int64_t kernel_size);

// ---- pooling and resampling ---------------------------------------------

/// 2x2 max pooling; ties go to the first element in row-major window order.
Tensor maxpool2d(const Tensor& input);
/// Scatter `values` (pooled shape) back to positions in `input_shape` given flat argmax indices.
Tensor index_scatter(const Tensor& values, std::shared_ptr<const std::vector<std::int64_t>> index,
                     const Shape& input_shape);
/// Gather flat positions of `source`; result shape is `out_shape`.
Tensor index_gather(const Tensor& source, std::shared_ptr<const std::vector<std::int64_t>> index,
                    const Shape& out_shape);
/// Nearest-neighbour x2 upsampling of [B, C, H, W].
Tensor upsample2d(const Tensor& input);
/// Sum over non-overlapping 2x2 windows (adjoint of upsample2d).
Tensor sumpool2d(const Tensor& input);

// ---- channel concatenation ----------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& a, std::int64_t start, std::int64_t count);
/// Embed `a` into a zero tensor with `total` channels starting at channel `start`.
Tensor pad_channels(const Tensor& a, std::int64_t start, std::int64_t total);

// ---- layers and losses --------------------------------------------------

/// Batch normalization with statistics of the current batch (no running averages).
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Mean softmax cross-entropy. `logits` is [B, n] or [B, n, H, W]; `labels` holds one class
/// index per row (or per pixel, ordered b, h, w).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Argmax over axis 1, one entry per row (or per pixel).
std::vector<int> argmax_axis1(const Tensor& logits);

}  // namespace metaland
