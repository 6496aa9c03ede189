#include <algorithm>

#include "metaland/errors.hpp"
#include "metaland/tensor.hpp"

namespace metaland {

namespace {

using Grads = std::vector<Tensor>;

void require_4d(const Tensor& t, const char* op, const char* what) {
  if (t.ndim() != 4) {
    throw DimensionError(std::string(op) + ": " + what + " must be 4-D, got " + to_string(t.shape()));
  }
}

// Output rows i for which i + offset stays inside [0, extent).
struct Span1 {
  std::int64_t begin, end;
};
Span1 valid_range(std::int64_t extent, std::int64_t offset) {
  return {std::max<std::int64_t>(0, -offset), std::min(extent, extent - offset)};
}

struct ConvDims {
  std::int64_t batch, in_ch, out_ch, height, width, k, pad;
};

}  // namespace

// The three ops below are the partial derivatives of the trilinear form
// sum(G * conv(x, w)); each one's backward is expressed through the other two.

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
  require_4d(input, "conv2d", "input");
  require_4d(kernel, "conv2d", "kernel");
  const std::int64_t k = kernel.dim(2);
  if (kernel.dim(3) != k || k % 2 == 0) {
    throw DimensionError("conv2d: kernel must be square with odd size, got " + to_string(kernel.shape()));
  }
  if (input.dim(1) != kernel.dim(1)) {
    throw DimensionError("conv2d: input channels " + to_string(input.shape()) +
                         " do not match kernel " + to_string(kernel.shape()));
  }
  const ConvDims d{input.dim(0), input.dim(1), kernel.dim(0), input.dim(2), input.dim(3), k, (k - 1) / 2};
  auto x = input.data();
  auto w = kernel.data();
  std::vector<double> out(static_cast<std::size_t>(d.batch * d.out_ch * d.height * d.width), 0.0);
  const std::int64_t plane = d.height * d.width;
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t f = 0; f < d.out_ch; ++f) {
      double* dst = out.data() + (b * d.out_ch + f) * plane;
      for (std::int64_t c = 0; c < d.in_ch; ++c) {
        const double* src = x.data() + (b * d.in_ch + c) * plane;
        const double* wk = w.data() + ((f * d.in_ch + c) * d.k) * d.k;
        for (std::int64_t di = 0; di < d.k; ++di) {
          const auto rows = valid_range(d.height, di - d.pad);
          for (std::int64_t dj = 0; dj < d.k; ++dj) {
            const double weight = wk[di * d.k + dj];
            const auto cols = valid_range(d.width, dj - d.pad);
            for (std::int64_t i = rows.begin; i < rows.end; ++i) {
              double* o = dst + i * d.width;
              const double* s = src + (i + di - d.pad) * d.width + (dj - d.pad);
              for (std::int64_t j = cols.begin; j < cols.end; ++j) o[j] += weight * s[j];
            }
          }
        }
      }
    }
  }
  return Tensor::make_result(
      {d.batch, d.out_ch, d.height, d.width}, std::move(out), {input, kernel},
      [k](const Tensor&, const Tensor& g, const Grads& in, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d_input_grad(g, in[1]) : Tensor(),
                needs[1] ? conv2d_kernel_grad(in[0], g, k) : Tensor()};
      },
      "conv2d");
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  auto y = conv2d(input, kernel);
  if (bias.ndim() != 1 || bias.dim(0) != kernel.dim(0)) {
    throw DimensionError("conv2d: bias " + to_string(bias.shape()) + " does not match kernel " +
                         to_string(kernel.shape()));
  }
  return add(y, channel_expand(bias, y.shape()));
}

Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernel) {
  require_4d(grad_out, "conv2d_input_grad", "gradient");
  require_4d(kernel, "conv2d_input_grad", "kernel");
  if (grad_out.dim(1) != kernel.dim(0)) {
    throw DimensionError("conv2d_input_grad: gradient " + to_string(grad_out.shape()) +
                         " does not match kernel " + to_string(kernel.shape()));
  }
  const std::int64_t k = kernel.dim(2);
  const ConvDims d{grad_out.dim(0), kernel.dim(1), kernel.dim(0), grad_out.dim(2), grad_out.dim(3), k, (k - 1) / 2};
  auto g = grad_out.data();
  auto w = kernel.data();
  const std::int64_t plane = d.height * d.width;
  std::vector<double> out(static_cast<std::size_t>(d.batch * d.in_ch * plane), 0.0);
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t f = 0; f < d.out_ch; ++f) {
      const double* src = g.data() + (b * d.out_ch + f) * plane;
      for (std::int64_t c = 0; c < d.in_ch; ++c) {
        double* dst = out.data() + (b * d.in_ch + c) * plane;
        const double* wk = w.data() + ((f * d.in_ch + c) * d.k) * d.k;
        for (std::int64_t di = 0; di < d.k; ++di) {
          const auto rows = valid_range(d.height, di - d.pad);
          for (std::int64_t dj = 0; dj < d.k; ++dj) {
            const double weight = wk[di * d.k + dj];
            const auto cols = valid_range(d.width, dj - d.pad);
            for (std::int64_t i = rows.begin; i < rows.end; ++i) {
              const double* s = src + i * d.width;
              double* o = dst + (i + di - d.pad) * d.width + (dj - d.pad);
              for (std::int64_t j = cols.begin; j < cols.end; ++j) o[j] += weight * s[j];
            }
          }
        }
      }
    }
  }
  return Tensor::make_result(
      {d.batch, d.in_ch, d.height, d.width}, std::move(out), {grad_out, kernel},
      [k](const Tensor&, const Tensor& h, const Grads& in, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d(h, in[1]) : Tensor(), needs[1] ? conv2d_kernel_grad(h, in[0], k) : Tensor()};
      },
      "conv2d_input_grad");
}

Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_out, std::int64_t kernel_size) {
  require_4d(input, "conv2d_kernel_grad", "input");
  require_4d(grad_out, "conv2d_kernel_grad", "gradient");
  if (input.dim(0) != grad_out.dim(0) || input.dim(2) != grad_out.dim(2) || input.dim(3) != grad_out.dim(3)) {
    throw DimensionError("conv2d_kernel_grad: input " + to_string(input.shape()) +
                         " does not match gradient " + to_string(grad_out.shape()));
  }
  const std::int64_t k = kernel_size;
  const ConvDims d{input.dim(0), input.dim(1), grad_out.dim(1), input.dim(2), input.dim(3), k, (k - 1) / 2};
  auto x = input.data();
  auto g = grad_out.data();
  const std::int64_t plane = d.height * d.width;
  std::vector<double> out(static_cast<std::size_t>(d.out_ch * d.in_ch * k * k), 0.0);
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t f = 0; f < d.out_ch; ++f) {
      const double* gs = g.data() + (b * d.out_ch + f) * plane;
      for (std::int64_t c = 0; c < d.in_ch; ++c) {
        const double* src = x.data() + (b * d.in_ch + c) * plane;
        double* wk = out.data() + ((f * d.in_ch + c) * d.k) * d.k;
        for (std::int64_t di = 0; di < d.k; ++di) {
          const auto rows = valid_range(d.height, di - d.pad);
          for (std::int64_t dj = 0; dj < d.k; ++dj) {
            const auto cols = valid_range(d.width, dj - d.pad);
            double acc = 0.0;
            for (std::int64_t i = rows.begin; i < rows.end; ++i) {
              const double* gi = gs + i * d.width;
              const double* s = src + (i + di - d.pad) * d.width + (dj - d.pad);
              for (std::int64_t j = cols.begin; j < cols.end; ++j) acc += gi[j] * s[j];
            }
            wk[di * d.k + dj] += acc;
          }
        }
      }
    }
  }
  return Tensor::make_result(
      {d.out_ch, d.in_ch, k, k}, std::move(out), {input, grad_out},
      [](const Tensor&, const Tensor& h, const Grads& in, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d_input_grad(in[1], h) : Tensor(), needs[1] ? conv2d(in[0], h) : Tensor()};
      },
      "conv2d_kernel_grad");
}

// ---- pooling ------------------------------------------------------------

Tensor maxpool2d(const Tensor& input) {
  require_4d(input, "maxpool2d", "input");
  const auto batch = input.dim(0), ch = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("maxpool2d: spatial size must be even, got " + to_string(input.shape()));
  }
  const auto oh = h / 2, ow = w / 2;
  auto x = input.data();
  auto index = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(batch * ch * oh * ow));
  std::vector<double> out(index->size());
  std::size_t n = 0;
  for (std::int64_t p = 0; p < batch * ch; ++p) {
    const std::int64_t base = p * h * w;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j, ++n) {
        std::int64_t best = base + (2 * i) * w + 2 * j;
        const std::int64_t window[3] = {best + 1, best + w, best + w + 1};
        for (auto idx : window) {
          if (x[static_cast<std::size_t>(idx)] > x[static_cast<std::size_t>(best)]) best = idx;
        }
        (*index)[n] = best;
        out[n] = x[static_cast<std::size_t>(best)];
      }
    }
  }
  std::shared_ptr<const std::vector<std::int64_t>> frozen = index;
  Shape in_shape = input.shape();
  return Tensor::make_result(
      {batch, ch, oh, ow}, std::move(out), {input},
      [frozen, in_shape](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {index_scatter(g, frozen, in_shape)};
      },
      "maxpool2d");
}

Tensor index_scatter(const Tensor& values, std::shared_ptr<const std::vector<std::int64_t>> index,
                     const Shape& input_shape) {
  if (static_cast<std::int64_t>(index->size()) != values.numel()) {
    throw DimensionError("index_scatter: index length does not match values " + to_string(values.shape()));
  }
  auto v = values.data();
  std::vector<double> out(static_cast<std::size_t>(numel(input_shape)), 0.0);
  for (std::size_t i = 0; i < index->size(); ++i) out[static_cast<std::size_t>((*index)[i])] += v[i];
  Shape value_shape = values.shape();
  return Tensor::make_result(
      input_shape, std::move(out), {values},
      [index, value_shape](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {index_gather(g, index, value_shape)};
      },
      "index_scatter");
}

Tensor index_gather(const Tensor& source, std::shared_ptr<const std::vector<std::int64_t>> index,
                    const Shape& out_shape) {
  if (static_cast<std::int64_t>(index->size()) != numel(out_shape)) {
    throw DimensionError("index_gather: index length does not match output " + to_string(out_shape));
  }
  auto s = source.data();
  std::vector<double> out(index->size());
  for (std::size_t i = 0; i < index->size(); ++i) out[i] = s[static_cast<std::size_t>((*index)[i])];
  Shape source_shape = source.shape();
  return Tensor::make_result(
      out_shape, std::move(out), {source},
      [index, source_shape](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {index_scatter(g, index, source_shape)};
      },
      "index_gather");
}

Tensor upsample2d(const Tensor& input) {
  require_4d(input, "upsample2d", "input");
  const auto planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  auto x = input.data();
  std::vector<double> out(static_cast<std::size_t>(planes * 4 * h * w));
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = out.data() + p * 4 * h * w;
    for (std::int64_t i = 0; i < 2 * h; ++i) {
      for (std::int64_t j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
    }
  }
  return Tensor::make_result(
      {input.dim(0), input.dim(1), 2 * h, 2 * w}, std::move(out), {input},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {sumpool2d(g)};
      },
      "upsample2d");
}

Tensor sumpool2d(const Tensor& input) {
  require_4d(input, "sumpool2d", "input");
  const auto planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("sumpool2d: spatial size must be even, got " + to_string(input.shape()));
  }
  auto x = input.data();
  std::vector<double> out(static_cast<std::size_t>(planes * (h / 2) * (w / 2)), 0.0);
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = out.data() + p * (h / 2) * (w / 2);
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) dst[(i / 2) * (w / 2) + j / 2] += src[i * w + j];
    }
  }
  return Tensor::make_result(
      {input.dim(0), input.dim(1), h / 2, w / 2}, std::move(out), {input},
      [](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {upsample2d(g)};
      },
      "sumpool2d");
}

// ---- channel concatenation ----------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_4d(a, "concat_channels", "first input");
  require_4d(b, "concat_channels", "second input");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw DimensionError("concat_channels: " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ outside the channel axis");
  }
  const auto batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(static_cast<std::size_t>(batch * (ca + cb) * plane));
  for (std::int64_t n = 0; n < batch; ++n) {
    std::copy_n(x.data() + n * ca * plane, ca * plane, out.data() + n * (ca + cb) * plane);
    std::copy_n(y.data() + n * cb * plane, cb * plane, out.data() + (n * (ca + cb) + ca) * plane);
  }
  return Tensor::make_result(
      {batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
      [ca, cb](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? slice_channels(g, 0, ca) : Tensor(), needs[1] ? slice_channels(g, ca, cb) : Tensor()};
      },
      "concat_channels");
}

Tensor slice_channels(const Tensor& a, std::int64_t start, std::int64_t count) {
  require_4d(a, "slice_channels", "input");
  const auto batch = a.dim(0), ch = a.dim(1), plane = a.dim(2) * a.dim(3);
  if (start < 0 || count <= 0 || start + count > ch) {
    throw DimensionError("slice_channels: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + to_string(a.shape()));
  }
  auto x = a.data();
  std::vector<double> out(static_cast<std::size_t>(batch * count * plane));
  for (std::int64_t n = 0; n < batch; ++n) {
    std::copy_n(x.data() + (n * ch + start) * plane, count * plane, out.data() + n * count * plane);
  }
  return Tensor::make_result(
      {batch, count, a.dim(2), a.dim(3)}, std::move(out), {a},
      [start, ch](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {pad_channels(g, start, ch)};
      },
      "slice_channels");
}

Tensor pad_channels(const Tensor& a, std::int64_t start, std::int64_t total) {
  require_4d(a, "pad_channels", "input");
  const auto batch = a.dim(0), count = a.dim(1), plane = a.dim(2) * a.dim(3);
  if (start < 0 || start + count > total) {
    throw DimensionError("pad_channels: " + to_string(a.shape()) + " does not fit in " +
                         std::to_string(total) + " channels at " + std::to_string(start));
  }
  auto x = a.data();
  std::vector<double> out(static_cast<std::size_t>(batch * total * plane), 0.0);
  for (std::int64_t n = 0; n < batch; ++n) {
    std::copy_n(x.data() + n * count * plane, count * plane, out.data() + (n * total + start) * plane);
  }
  return Tensor::make_result(
      {batch, total, a.dim(2), a.dim(3)}, std::move(out), {a},
      [start, count](const Tensor&, const Tensor& g, const Grads&, const std::vector<bool>&) -> Grads {
        return {slice_channels(g, start, count)};
      },
      "pad_channels");
}

}  // namespace metaland
