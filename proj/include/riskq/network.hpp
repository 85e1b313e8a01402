#pragma once

// Feedforward network model and batched inference.
//
// Tensors are stored flat in height-width-channel order. A flat input of
// size n is the shape {1, 1, n} with rank 1.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "riskq/error.hpp"
#include "riskq/norm.hpp"
#include "riskq/parallel.hpp"

namespace riskq {

struct Shape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;
  int rank = 1; // 1 = flat vector, 3 = H x W x C image

  static Shape flat(std::size_t n) { return {1, 1, n, 1}; }
  static Shape image(std::size_t h, std::size_t w, std::size_t c) { return {h, w, c, 3}; }

  std::size_t size() const { return height * width * channels; }
  bool is_flat() const { return rank == 1; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  if (s.is_flat())
    return "[" + std::to_string(s.channels) + "]";
  return "[" + std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels) + "]";
}

enum class Padding { Valid, Same };

// y = W x + b with W stored row-major as out x in.
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

// Kernel stored as [kernel_h][kernel_w][in_channels][filters].
struct Conv2D {
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  Padding padding = Padding::Valid;
  std::vector<double> kernel;
  std::vector<double> bias;
};

struct MaxPool {
  std::size_t window_h = 2;
  std::size_t window_w = 2;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;
};

struct Flatten {};
struct ReLU {};
struct Tanh {};
struct Sigmoid {};
struct Softmax {};

// Batch normalisation folded into a per-channel affine map.
struct BatchNormFolded {
  std::vector<double> scale;
  std::vector<double> shift;
};

using LayerKind =
    std::variant<Dense, Conv2D, MaxPool, Flatten, ReLU, Tanh, Sigmoid, Softmax, BatchNormFolded>;

inline std::string layer_name(const LayerKind& kind) {
  static constexpr const char* names[] = {"dense", "conv2d",  "maxpool", "flatten",  "relu",
                                          "tanh",  "sigmoid", "softmax", "batchnorm"};
  return names[kind.index()];
}

struct Layer {
  LayerKind kind;
  Shape input;
  Shape output;
};

/// Points evaluated together in one forward call.
class Batch {
public:
  explicit Batch(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty())
      throw ContractError("batch must contain at least one point");
    const std::size_t n = points_.front().size();
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (points_[i].size() != n)
        throw ShapeError("batch point " + std::to_string(i) + " has dimension " +
                         std::to_string(points_[i].size()) + ", expected " + std::to_string(n));
  }

  std::size_t count() const { return points_.size(); }
  std::size_t dimension() const { return points_.front().size(); }
  std::span<const Vector> points() const { return points_; }
  const Vector& operator[](std::size_t i) const { return points_[i]; }

private:
  std::vector<Vector> points_;
};

struct QueryStats {
  std::uint64_t queries = 0;
  std::uint64_t batches = 0;
};

namespace detail {

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                      Padding padding) {
  if (padding == Padding::Same)
    return (in + stride - 1) / stride;
  if (in < kernel)
    return 0;
  return (in - kernel) / stride + 1;
}

inline std::size_t same_padding_before(std::size_t in, std::size_t out, std::size_t kernel,
                                       std::size_t stride) {
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>((out - 1) * stride + kernel) -
                               static_cast<std::ptrdiff_t>(in);
  return total > 0 ? static_cast<std::size_t>(total / 2) : 0;
}

struct Counters {
  std::atomic<std::uint64_t> queries{0};
  std::atomic<std::uint64_t> batches{0};
};

} // namespace detail

/// Immutable feedforward network f: R^n -> R^m. Safe to share between
/// threads; only the query counters change on evaluation.
class Network {
public:
  Network(Shape input, std::vector<LayerKind> kinds)
      : input_(input), counters_(std::make_shared<detail::Counters>()) {
    if (input.size() == 0)
      throw ShapeError("network input shape is empty");
    if (kinds.empty())
      throw ShapeError("network has no layers");
    Shape current = input;
    layers_.reserve(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      Shape next = infer_output(i, kinds[i], current);
      layers_.push_back(Layer{std::move(kinds[i]), current, next});
      current = next;
    }
    if (!current.is_flat())
      throw ShapeError("final layer " + std::to_string(layers_.size() - 1) +
                       " must produce a flat output, got " + to_string(current));
    output_dim_ = current.size();
  }

  const Shape& input_shape() const { return input_; }
  std::size_t input_dim() const { return input_.size(); }
  std::size_t output_dim() const { return output_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool ends_with_softmax() const {
    return std::holds_alternative<Softmax>(layers_.back().kind);
  }

  /// Evaluates every point; output i belongs to input i regardless of how the
  /// batch was split across workers.
  std::vector<Vector> forward(std::span<const Vector> points) const {
    if (points.empty())
      throw ContractError("forward requires at least one point");
    for (std::size_t i = 0; i < points.size(); ++i)
      check_input(points[i], i);
    std::vector<Vector> outputs(points.size());
    parallel_for(points.size(), [&](std::size_t i) { outputs[i] = evaluate(points[i]); });
    counters_->queries.fetch_add(points.size());
    counters_->batches.fetch_add(1);
    return outputs;
  }

  std::vector<Vector> forward(const Batch& batch) const { return forward(batch.points()); }

  Vector forward_single(std::span<const double> x) const {
    const Vector point(x.begin(), x.end());
    return forward(std::span<const Vector>(&point, 1)).front();
  }

  QueryStats stats() const { return {counters_->queries.load(), counters_->batches.load()}; }

  void reset_stats() const {
    counters_->queries.store(0);
    counters_->batches.store(0);
  }

  /// Output shape of one layer; throws ShapeError naming the layer index.
  static Shape infer_output(std::size_t index, const LayerKind& kind, const Shape& in) {
    return infer_output_impl(index, kind, in);
  }

private:
  void check_input(std::span<const double> x, std::size_t index) const {
    if (x.size() != input_.size())
      throw ShapeError("input " + std::to_string(index) + " has dimension " +
                       std::to_string(x.size()) + " but layer 0 (" +
                       layer_name(layers_.front().kind) + ") expects " +
                       std::to_string(input_.size()));
    for (double v : x)
      if (!std::isfinite(v))
        throw InputError("input " + std::to_string(index) + " contains a non-finite value");
  }

  static Shape infer_output_impl(std::size_t index, const LayerKind& kind, const Shape& in) {
    const std::string where = "layer " + std::to_string(index) + " (" + layer_name(kind) + ")";
    auto fail = [&](const std::string& what) { throw ShapeError(where + ": " + what); };

    if (const auto* dense = std::get_if<Dense>(&kind)) {
      if (!in.is_flat())
        fail("dense layer needs a flat input, got " + to_string(in) + "; insert a flatten layer");
      if (dense->in != in.size())
        fail("declares " + std::to_string(dense->in) + " inputs but receives " +
             std::to_string(in.size()));
      if (dense->weights.size() != dense->in * dense->out)
        fail("weight matrix has " + std::to_string(dense->weights.size()) + " entries, expected " +
             std::to_string(dense->in * dense->out));
      if (dense->bias.size() != dense->out)
        fail("bias has " + std::to_string(dense->bias.size()) + " entries, expected " +
             std::to_string(dense->out));
      if (dense->out == 0)
        fail("zero output units");
      return Shape::flat(dense->out);
    }
    if (const auto* conv = std::get_if<Conv2D>(&kind)) {
      if (in.is_flat())
        fail("conv2d needs an HxWxC input");
      if (conv->in_channels != in.channels)
        fail("declares " + std::to_string(conv->in_channels) + " input channels but receives " +
             std::to_string(in.channels));
      if (conv->stride_h == 0 || conv->stride_w == 0 || conv->kernel_h == 0 || conv->kernel_w == 0)
        fail("kernel and stride must be positive");
      if (conv->kernel.size() != conv->kernel_h * conv->kernel_w * conv->in_channels * conv->filters)
        fail("kernel has " + std::to_string(conv->kernel.size()) + " entries, expected " +
             std::to_string(conv->kernel_h * conv->kernel_w * conv->in_channels * conv->filters));
      if (conv->bias.size() != conv->filters)
        fail("bias has " + std::to_string(conv->bias.size()) + " entries, expected " +
             std::to_string(conv->filters));
      const auto h = detail::conv_output_extent(in.height, conv->kernel_h, conv->stride_h, conv->padding);
      const auto w = detail::conv_output_extent(in.width, conv->kernel_w, conv->stride_w, conv->padding);
      if (h == 0 || w == 0)
        fail("kernel larger than input " + to_string(in));
      return Shape::image(h, w, conv->filters);
    }
    if (const auto* pool = std::get_if<MaxPool>(&kind)) {
      if (in.is_flat())
        fail("maxpool needs an HxWxC input");
      if (pool->stride_h == 0 || pool->stride_w == 0 || pool->window_h == 0 || pool->window_w == 0)
        fail("window and stride must be positive");
      const auto h = detail::conv_output_extent(in.height, pool->window_h, pool->stride_h, Padding::Valid);
      const auto w = detail::conv_output_extent(in.width, pool->window_w, pool->stride_w, Padding::Valid);
      if (h == 0 || w == 0)
        fail("window larger than input " + to_string(in));
      return Shape::image(h, w, in.channels);
    }
    if (std::holds_alternative<Flatten>(kind))
      return Shape::flat(in.size());
    if (const auto* bn = std::get_if<BatchNormFolded>(&kind)) {
      if (bn->scale.size() != in.channels || bn->shift.size() != in.channels)
        fail("scale/shift must have one entry per channel (" + std::to_string(in.channels) + ")");
      return in;
    }
    if (std::holds_alternative<Softmax>(kind) && !in.is_flat())
      fail("softmax needs a flat input");
    return in; // element-wise activations
  }

  Vector evaluate(std::span<const double> x) const {
    Vector current(x.begin(), x.end());
    Vector next;
    for (const Layer& layer : layers_) {
      std::visit([&](const auto& k) { apply(k, layer, current, next); }, layer.kind);
      std::swap(current, next);
    }
    return current;
  }

  static void apply(const Dense& d, const Layer&, const Vector& in, Vector& out) {
    out.assign(d.out, 0.0);
    for (std::size_t o = 0; o < d.out; ++o) {
      const double* row = d.weights.data() + o * d.in;
      double acc = d.bias[o];
      for (std::size_t i = 0; i < d.in; ++i)
        acc += row[i] * in[i];
      out[o] = acc;
    }
  }

  static void apply(const Conv2D& c, const Layer& layer, const Vector& in, Vector& out) {
    const Shape& is = layer.input;
    const Shape& os = layer.output;
    out.assign(os.size(), 0.0);
    std::size_t pad_top = 0, pad_left = 0;
    if (c.padding == Padding::Same) {
      pad_top = detail::same_padding_before(is.height, os.height, c.kernel_h, c.stride_h);
      pad_left = detail::same_padding_before(is.width, os.width, c.kernel_w, c.stride_w);
    }
    for (std::size_t oy = 0; oy < os.height; ++oy) {
      for (std::size_t ox = 0; ox < os.width; ++ox) {
        double* dst = out.data() + (oy * os.width + ox) * c.filters;
        for (std::size_t f = 0; f < c.filters; ++f)
          dst[f] = c.bias[f];
        for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride_h + ky) -
                                    static_cast<std::ptrdiff_t>(pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(is.height))
            continue;
          for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride_w + kx) -
                                      static_cast<std::ptrdiff_t>(pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(is.width))
              continue;
            const double* src = in.data() + (static_cast<std::size_t>(iy) * is.width +
                                             static_cast<std::size_t>(ix)) * is.channels;
            const double* w = c.kernel.data() + (ky * c.kernel_w + kx) * c.in_channels * c.filters;
            for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
              const double v = src[ch];
              const double* wrow = w + ch * c.filters;
              for (std::size_t f = 0; f < c.filters; ++f)
                dst[f] += v * wrow[f];
            }
          }
        }
      }
    }
  }

  static void apply(const MaxPool& p, const Layer& layer, const Vector& in, Vector& out) {
    const Shape& is = layer.input;
    const Shape& os = layer.output;
    out.assign(os.size(), 0.0);
    for (std::size_t oy = 0; oy < os.height; ++oy)
      for (std::size_t ox = 0; ox < os.width; ++ox)
        for (std::size_t ch = 0; ch < os.channels; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t ky = 0; ky < p.window_h; ++ky)
            for (std::size_t kx = 0; kx < p.window_w; ++kx) {
              const std::size_t iy = oy * p.stride_h + ky;
              const std::size_t ix = ox * p.stride_w + kx;
              best = std::max(best, in[(iy * is.width + ix) * is.channels + ch]);
            }
          out[(oy * os.width + ox) * os.channels + ch] = best;
        }
  }

  static void apply(const Flatten&, const Layer&, const Vector& in, Vector& out) { out = in; }

  static void apply(const ReLU&, const Layer&, const Vector& in, Vector& out) {
    out.resize(in.size());
    std::transform(in.begin(), in.end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  }

  static void apply(const Tanh&, const Layer&, const Vector& in, Vector& out) {
    out.resize(in.size());
    std::transform(in.begin(), in.end(), out.begin(), [](double v) { return std::tanh(v); });
  }

  static void apply(const Sigmoid&, const Layer&, const Vector& in, Vector& out) {
    out.resize(in.size());
    std::transform(in.begin(), in.end(), out.begin(),
                   [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }

  static void apply(const Softmax&, const Layer&, const Vector& in, Vector& out) {
    out.resize(in.size());
    const double top = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      out[i] = std::exp(in[i] - top);
      total += out[i];
    }
    for (double& v : out)
      v /= total;
  }

  static void apply(const BatchNormFolded& bn, const Layer& layer, const Vector& in, Vector& out) {
    out.resize(in.size());
    const std::size_t channels = layer.input.channels;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const std::size_t ch = i % channels;
      out[i] = in[i] * bn.scale[ch] + bn.shift[ch];
    }
  }

  Shape input_;
  std::vector<Layer> layers_;
  std::size_t output_dim_ = 0;
  std::shared_ptr<detail::Counters> counters_;
};

} // namespace riskq
