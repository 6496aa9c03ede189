#include "metaland/errors.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  if (input.ndim() < 2) throw DimensionError("batchnorm2d: input must have a channel axis, got " + to_string(input.shape()));
  const auto channels = input.dim(1);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("batchnorm2d: affine parameters " + to_string(gamma.shape()) + "/" +
                         to_string(beta.shape()) + " do not match input " + to_string(input.shape()));
  }
  const auto per_channel = input.numel() / channels;
  if (per_channel < 2) {
    throw DegenerateError("batchnorm2d: each channel needs at least 2 values, input " + to_string(input.shape()));
  }
  const double inv_count = 1.0 / static_cast<double>(per_channel);
  const auto& shape = input.shape();
  auto centered = input - channel_expand(scale(channel_sum(input), inv_count), shape);
  auto variance = scale(channel_sum(centered * centered), inv_count);
  auto inv_std = pow_scalar(add_scalar(variance, eps), -0.5);
  auto normalized = centered * channel_expand(inv_std, shape);
  return normalized * channel_expand(gamma, shape) + channel_expand(beta, shape);
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.ndim() != 2 && logits.ndim() != 4) {
    throw DimensionError("softmax_cross_entropy: logits must be [B, n] or [B, n, H, W], got " +
                         to_string(logits.shape()));
  }
  const auto batch = logits.dim(0), classes = logits.dim(1);
  const auto pixels = logits.numel() / (batch * classes);
  if (static_cast<std::int64_t>(labels.size()) != batch * pixels) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + to_string(logits.shape()));
  }
  auto onehot = std::make_shared<std::vector<double>>(static_cast<std::size_t>(logits.numel()), 0.0);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t p = 0; p < pixels; ++p) {
      const int label = labels[static_cast<std::size_t>(b * pixels + p)];
      if (label < 0 || label >= classes) {
        throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
      }
      (*onehot)[static_cast<std::size_t>((b * classes + label) * pixels + p)] = 1.0;
    }
  }
  auto picked = sum(mul_const(log_softmax(logits), std::move(onehot)));
  return scale(picked, -1.0 / static_cast<double>(labels.size()));
}

std::vector<int> argmax_axis1(const Tensor& logits) {
  if (logits.ndim() < 2) throw DimensionError("argmax_axis1: expected at least 2 axes, got " + to_string(logits.shape()));
  const auto batch = logits.dim(0), classes = logits.dim(1);
  const auto pixels = logits.numel() / (batch * classes);
  auto x = logits.data();
  std::vector<int> out(static_cast<std::size_t>(batch * pixels));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t p = 0; p < pixels; ++p) {
      int best = 0;
      for (std::int64_t c = 1; c < classes; ++c) {
        if (x[static_cast<std::size_t>((b * classes + c) * pixels + p)] >
            x[static_cast<std::size_t>((b * classes + best) * pixels + p)]) {
          best = static_cast<int>(c);
        }
      }
      out[static_cast<std::size_t>(b * pixels + p)] = best;
    }
  }
  return out;
}

}  // namespace metaland
