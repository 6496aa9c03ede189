#include "metaland/tensor.hpp"

#include <numeric>
#include <sstream>

#include "metaland/errors.hpp"

namespace metaland {

std::int64_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0); }

Tensor Tensor::full(const Shape& shape, double value) {
  check_shape(shape);
  return from_data(shape, std::vector<double>(static_cast<std::size_t>(metaland::numel(shape)), value));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data) {
  check_shape(shape);
  if (static_cast<std::int64_t>(data.size()) != metaland::numel(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->storage = std::make_shared<const std::vector<double>>(std::move(data));
  return Tensor(std::move(node));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                           detail::BackwardFn backward, const char* op) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->storage = std::make_shared<const std::vector<double>>(std::move(data));
  node->op = op;
  bool tracked = false;
  for (const auto& p : parents) tracked = tracked || p.requires_grad();
  if (tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(node_->shape));
  }
  return node_->shape[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->storage->size()); }

std::span<const double> Tensor::data() const { return {node_->storage->data(), node_->storage->size()}; }

double Tensor::item() const {
  if (numel() != 1) throw ValidationError("item() on tensor of shape " + to_string(shape()));
  return (*node_->storage)[0];
}

Eigen::Map<const Eigen::VectorXd> Tensor::vec() const {
  return {node_->storage->data(), static_cast<Eigen::Index>(node_->storage->size())};
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_record() const { return node_ && static_cast<bool>(node_->backward); }

const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->storage = node_->storage;
  return Tensor(std::move(node));
}

Tensor Tensor::as_leaf() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->storage = node_->storage;
  node->requires_grad = true;
  return Tensor(std::move(node));
}

const std::vector<Tensor>& Tensor::parents() const { return node_->parents; }

const detail::BackwardFn& Tensor::backward_fn() const { return node_->backward; }

}  // namespace metaland
