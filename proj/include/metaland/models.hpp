#pragma once

#include <cstdint>

#include "metaland/param_set.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

/// Classification CNN: `depth` blocks of conv3x3 -> batchnorm -> relu -> maxpool2,
/// followed by a linear head on the collapsed width-dimensional feature.
struct CnnConfig {
  std::int64_t in_channels = 3;
  std::int64_t num_classes = 4;
  std::int64_t input_size = 32;
  std::int64_t width = 16;
  std::int64_t depth = 5;

  /// Throws ConfigError unless input_size / 2^depth == 1 and all sizes are positive.
  void validate() const;
  std::int64_t parameter_count() const;
};

/// U-Net with one conv block per encoder level, nearest-neighbour upsampling,
/// concatenated skips and a final 1x1 classifier.
struct UnetConfig {
  std::int64_t in_channels = 3;
  std::int64_t num_classes = 4;
  std::int64_t input_size = 32;
  std::int64_t levels = 2;
  std::int64_t base_width = 8;

  void validate() const;
  std::int64_t parameter_count() const;
  /// Channels of the encoder feature at `level` (base_width * 2^level).
  std::int64_t encoder_width(std::int64_t level) const { return base_width << level; }
};

enum class Architecture { cnn, unet };

/// Weights uniform in +-sqrt(1/fan_in), zero biases, gamma = 1, beta = 0.
ParamSet build_cnn(const CnnConfig& cfg, std::uint64_t seed);
ParamSet build_unet(const UnetConfig& cfg, std::uint64_t seed);

/// Infers the architecture from parameter names.
Architecture detect_architecture(const ParamSet& params);

/// Logits [B, num_classes]; the block count is read from `params`.
Tensor forward_classify(const ParamSet& params, const Tensor& batch);
/// Per-pixel logits [B, num_classes, H, W].
Tensor forward_segment(const ParamSet& params, const Tensor& batch);
/// Dispatches on detect_architecture().
Tensor forward(const ParamSet& params, const Tensor& batch);

/// Conv -> batchnorm -> relu using entries `<prefix>.conv.*` and `<prefix>.bn.*`.
Tensor conv_block(const ParamSet& params, const std::string& prefix, const Tensor& x);

}  // namespace metaland
