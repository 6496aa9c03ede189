#include "metaland/models.hpp"

#include <cmath>
#include <random>
#include <string>

#include "metaland/errors.hpp"
#include "metaland/rng.hpp"

namespace metaland {

namespace {

Tensor uniform_weights(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = dist(rng);
  return Tensor::from_data(shape, std::move(values));
}

void add_conv_block(ParamSet& params, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng) {
  params.add(prefix + ".conv.weight", uniform_weights({out, in, 3, 3}, in * 9, rng));
  params.add(prefix + ".conv.bias", Tensor::zeros({out}));
  params.add(prefix + ".bn.gamma", Tensor::full({out}, 1.0));
  params.add(prefix + ".bn.beta", Tensor::zeros({out}));
}

std::int64_t conv_block_count(std::int64_t in, std::int64_t out) { return out * in * 9 + out + 2 * out; }

void require_input(const ParamSet& params, const std::string& first_weight, const Tensor& batch) {
  if (batch.ndim() != 4) throw DimensionError("model input must be [B, C, H, W], got " + to_string(batch.shape()));
  const auto& w = params.at(first_weight);
  if (batch.dim(1) != w.dim(1)) {
    throw DimensionError("model expects " + std::to_string(w.dim(1)) + " input channels, batch is " +
                         to_string(batch.shape()));
  }
}

}  // namespace

void CnnConfig::validate() const {
  if (in_channels <= 0 || num_classes <= 0 || width <= 0 || depth <= 0 || input_size <= 0) {
    throw ConfigError("cnn config: all sizes must be positive");
  }
  if (depth >= 62 || (input_size >> depth) != 1 || (input_size & (input_size - 1)) != 0) {
    throw ConfigError("cnn config: input_size " + std::to_string(input_size) + " must equal 2^depth (depth " +
                      std::to_string(depth) + ")");
  }
}

std::int64_t CnnConfig::parameter_count() const {
  validate();
  return conv_block_count(in_channels, width) + (depth - 1) * conv_block_count(width, width) +
         width * num_classes + num_classes;
}

void UnetConfig::validate() const {
  if (in_channels <= 0 || num_classes <= 0 || levels <= 0 || base_width <= 0 || input_size <= 0) {
    throw ConfigError("unet config: all sizes must be positive");
  }
  if (levels >= 30 || input_size % (std::int64_t{1} << levels) != 0) {
    throw ConfigError("unet config: input_size " + std::to_string(input_size) + " not divisible by 2^" +
                      std::to_string(levels));
  }
}

std::int64_t UnetConfig::parameter_count() const {
  validate();
  std::int64_t total = conv_block_count(in_channels, base_width);
  for (std::int64_t l = 1; l <= levels; ++l) total += conv_block_count(encoder_width(l - 1), encoder_width(l));
  for (std::int64_t l = levels - 1; l >= 0; --l) {
    total += conv_block_count(encoder_width(l + 1), encoder_width(l));
    total += conv_block_count(2 * encoder_width(l), encoder_width(l));
  }
  return total + num_classes * base_width + num_classes;
}

ParamSet build_cnn(const CnnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamSet params;
  for (std::int64_t i = 0; i < cfg.depth; ++i) {
    add_conv_block(params, "block" + std::to_string(i), i == 0 ? cfg.in_channels : cfg.width, cfg.width, rng);
  }
  params.add("head.weight", uniform_weights({cfg.width, cfg.num_classes}, cfg.width, rng));
  params.add("head.bias", Tensor::zeros({cfg.num_classes}));
  return params;
}

ParamSet build_unet(const UnetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamSet params;
  add_conv_block(params, "enc0", cfg.in_channels, cfg.base_width, rng);
  for (std::int64_t l = 1; l <= cfg.levels; ++l) {
    add_conv_block(params, "enc" + std::to_string(l), cfg.encoder_width(l - 1), cfg.encoder_width(l), rng);
  }
  for (std::int64_t l = cfg.levels - 1; l >= 0; --l) {
    const auto tag = "dec" + std::to_string(l);
    add_conv_block(params, tag + ".up", cfg.encoder_width(l + 1), cfg.encoder_width(l), rng);
    add_conv_block(params, tag + ".fuse", 2 * cfg.encoder_width(l), cfg.encoder_width(l), rng);
  }
  params.add("out.weight", uniform_weights({cfg.num_classes, cfg.base_width, 1, 1}, cfg.base_width, rng));
  params.add("out.bias", Tensor::zeros({cfg.num_classes}));
  return params;
}

Architecture detect_architecture(const ParamSet& params) {
  if (params.contains("block0.conv.weight") && params.contains("head.weight")) return Architecture::cnn;
  if (params.contains("enc0.conv.weight") && params.contains("out.weight")) return Architecture::unet;
  throw ValidationError("parameter set matches neither the cnn nor the unet layout");
}

Tensor conv_block(const ParamSet& params, const std::string& prefix, const Tensor& x) {
  auto y = conv2d(x, params.at(prefix + ".conv.weight"), params.at(prefix + ".conv.bias"));
  return relu(batchnorm2d(y, params.at(prefix + ".bn.gamma"), params.at(prefix + ".bn.beta")));
}

Tensor forward_classify(const ParamSet& params, const Tensor& batch) {
  require_input(params, "block0.conv.weight", batch);
  Tensor x = batch;
  for (int i = 0;; ++i) {
    const auto prefix = "block" + std::to_string(i);
    if (!params.contains(prefix + ".conv.weight")) break;
    x = maxpool2d(conv_block(params, prefix, x));
  }
  if (x.dim(2) != 1 || x.dim(3) != 1) {
    throw DimensionError("forward_classify: input " + to_string(batch.shape()) + " does not collapse to 1x1, got " +
                         to_string(x.shape()));
  }
  const auto& w = params.at("head.weight");
  auto features = reshape(x, {x.dim(0), x.dim(1)});
  auto logits = matmul(features, w);
  return logits + channel_expand(params.at("head.bias"), logits.shape());
}

Tensor forward_segment(const ParamSet& params, const Tensor& batch) {
  require_input(params, "enc0.conv.weight", batch);
  std::vector<Tensor> encoder{conv_block(params, "enc0", batch)};
  for (int l = 1; params.contains("enc" + std::to_string(l) + ".conv.weight"); ++l) {
    const auto& prev = encoder.back();
    if (prev.dim(2) % 2 != 0 || prev.dim(3) % 2 != 0) {
      throw DimensionError("forward_segment: input " + to_string(batch.shape()) + " not divisible by 2^" +
                           std::to_string(encoder.size()));
    }
    encoder.push_back(conv_block(params, "enc" + std::to_string(l), maxpool2d(prev)));
  }
  Tensor h = encoder.back();
  for (auto l = static_cast<std::int64_t>(encoder.size()) - 2; l >= 0; --l) {
    const auto tag = "dec" + std::to_string(l);
    auto up = conv_block(params, tag + ".up", upsample2d(h));
    h = conv_block(params, tag + ".fuse", concat_channels(up, encoder[static_cast<std::size_t>(l)]));
  }
  return conv2d(h, params.at("out.weight"), params.at("out.bias"));
}

Tensor forward(const ParamSet& params, const Tensor& batch) {
  return detect_architecture(params) == Architecture::cnn ? forward_classify(params, batch)
                                                          : forward_segment(params, batch);
}

}  // namespace metaland
