#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "scatterbox/array.hpp"
#include "scatterbox/atloss.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/rng.hpp"

namespace sbx {

struct ConvStackSpec {
  std::size_t kernels = 64;
  std::size_t kernel_size = 3;  // odd; zero "same" padding
  std::size_t pool = 2;         // average pool, floor division of the extent

  bool operator==(const ConvStackSpec&) const = default;
};

// Conv stacks (conv -> ReLU -> average pool), then a dense softmax head.
// Inputs are standardised per channel with (x - input_offset[c]) / input_scale[c]
// before the first convolution.
struct ConvClassifierSpec {
  std::size_t channels = 1, height = 1, width = 1;
  std::vector<ConvStackSpec> stacks;
  std::size_t classes = 6;
  double l2_weight = 0.001;
  std::vector<double> input_offset;  // empty = zeros
  std::vector<double> input_scale;   // empty = ones

  std::size_t input_size() const { return channels * height * width; }
  bool operator==(const ConvClassifierSpec&) const = default;
};

// Where one layer lives in the flat parameter vector and what it sees.
struct LayerGeometry {
  std::size_t in_channels, out_channels, kernel_size, pool;
  std::size_t in_h, in_w;    // convolution input and output extent
  std::size_t out_h, out_w;  // after pooling
  std::size_t weight_offset, bias_offset;
};

struct ModelGeometry {
  std::vector<LayerGeometry> conv;
  std::size_t flat = 0;  // dense input size
  std::size_t dense_weight_offset = 0, dense_bias_offset = 0;
  std::size_t parameter_count = 0;
};

inline ModelGeometry geometry(const ConvClassifierSpec& spec) {
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) throw ParameterError("input shape must be positive");
  if (spec.classes < 2) throw ParameterError("need at least two classes");
  if (!(spec.l2_weight >= 0.0)) throw ParameterError("l2 weight must be non-negative");
  if ((!spec.input_offset.empty() && spec.input_offset.size() != spec.channels) ||
      (!spec.input_scale.empty() && spec.input_scale.size() != spec.channels))
    throw ParameterError("input standardisation needs one offset and scale per channel");
  for (double s : spec.input_scale)
    if (!(s > 0.0)) throw ParameterError("input scale must be positive");
  ModelGeometry g;
  std::size_t c = spec.channels, h = spec.height, w = spec.width, offset = 0;
  for (std::size_t i = 0; i < spec.stacks.size(); ++i) {
    const auto& s = spec.stacks[i];
    if (s.kernels == 0 || s.kernel_size == 0 || s.kernel_size % 2 == 0 || s.pool == 0)
      throw ParameterError("stack " + std::to_string(i + 1) + ": kernels, odd kernel size and pool must be positive");
    LayerGeometry L{c, s.kernels, s.kernel_size, s.pool, h, w, h / s.pool, w / s.pool, 0, 0};
    if (L.out_h == 0 || L.out_w == 0)
      throw ParameterError("stack " + std::to_string(i + 1) + " pools a " + std::to_string(h) + "x" +
                           std::to_string(w) + " map down to nothing");
    L.weight_offset = offset;
    offset += L.out_channels * L.in_channels * L.kernel_size * L.kernel_size;
    L.bias_offset = offset;
    offset += L.out_channels;
    g.conv.push_back(L);
    c = L.out_channels;
    h = L.out_h;
    w = L.out_w;
  }
  g.flat = c * h * w;
  g.dense_weight_offset = offset;
  offset += spec.classes * g.flat;
  g.dense_bias_offset = offset;
  offset += spec.classes;
  g.parameter_count = offset;
  return g;
}

inline std::size_t parameter_count(const ConvClassifierSpec& spec) { return geometry(spec).parameter_count; }

/// Four stacks of 3x3 convolutions with 64, 64, 64 and k4 kernels, 2x2
/// pooling, L2 0.001. k4 is the value in [1, 256] whose total parameter
/// count is closest to 82 462; the result must land in [75 000, 90 000].
inline ConvClassifierSpec standard_spec(std::size_t channels, std::size_t height, std::size_t width,
                                     std::size_t classes = 6) {
  ConvClassifierSpec spec{channels, height, width, {{64, 3, 2}, {64, 3, 2}, {64, 3, 2}, {1, 3, 2}}, classes, 0.001, {}, {}};
  const double target = 82462.0;
  std::size_t best = 0;
  double best_gap = 1e300;
  for (std::size_t k = 1; k <= 256; ++k) {
    spec.stacks[3].kernels = k;
    const double gap = std::abs(static_cast<double>(parameter_count(spec)) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  spec.stacks[3].kernels = best;
  const std::size_t count = parameter_count(spec);
  if (count < 75000 || count > 90000)
    throw ParameterError("no fourth-stack width puts the parameter count in [75000, 90000] for this input (best " +
                         std::to_string(count) + ")");
  return spec;
}

// ---------------------------------------------------------------------------

template <typename T>
struct ConvClassifier {
  ConvClassifierSpec spec;
  ModelGeometry geo;
  std::vector<T> params;

  ConvClassifier() = default;
  explicit ConvClassifier(ConvClassifierSpec s) : spec(std::move(s)), geo(geometry(spec)), params(geo.parameter_count) {}

  /// Weights uniform in +-sqrt(6 / fan_in), biases zero.
  void init_he_uniform(std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::fill(params.begin(), params.end(), T(0));
    for (const auto& L : geo.conv) {
      const double bound = std::sqrt(6.0 / static_cast<double>(L.in_channels * L.kernel_size * L.kernel_size));
      const std::size_t n = L.out_channels * L.in_channels * L.kernel_size * L.kernel_size;
      for (std::size_t i = 0; i < n; ++i) params[L.weight_offset + i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(geo.flat));
    for (std::size_t i = 0; i < spec.classes * geo.flat; ++i)
      params[geo.dense_weight_offset + i] = static_cast<T>(rng.uniform(-bound, bound));
  }

  /// Sum of squared weights (biases excluded).
  double weight_norm2() const {
    double acc = 0.0;
    auto add = [&](std::size_t begin, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(params[begin + i]) * params[begin + i];
    };
    for (const auto& L : geo.conv) add(L.weight_offset, L.out_channels * L.in_channels * L.kernel_size * L.kernel_size);
    add(geo.dense_weight_offset, spec.classes * geo.flat);
    return acc;
  }

  bool is_weight(std::size_t index) const {
    for (const auto& L : geo.conv)
      if (index >= L.weight_offset && index < L.bias_offset) return true;
    return index >= geo.dense_weight_offset && index < geo.dense_bias_offset;
  }
};

template <typename To, typename From>
ConvClassifier<To> model_cast(const ConvClassifier<From>& m) {
  ConvClassifier<To> out(m.spec);
  for (std::size_t i = 0; i < m.params.size(); ++i) out.params[i] = static_cast<To>(m.params[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

// Dot product with eight independent partial sums (fixed order, vectorisable).
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// cols((c*K + u)*K + v, y*W + x) = in(c, y + u - K/2, x + v - K/2), zero outside.
template <typename T>
void im2col(const T* in, const LayerGeometry& L, T* cols) {
  const std::size_t K = L.kernel_size, H = L.in_h, W = L.in_w;
  const long long half = static_cast<long long>(K / 2);
  std::size_t row = 0;
  for (std::size_t c = 0; c < L.in_channels; ++c)
    for (std::size_t u = 0; u < K; ++u)
      for (std::size_t v = 0; v < K; ++v, ++row) {
        T* dst = cols + row * H * W;
        const long long du = static_cast<long long>(u) - half, dv = static_cast<long long>(v) - half;
        for (std::size_t y = 0; y < H; ++y) {
          const long long sy = static_cast<long long>(y) + du;
          T* d = dst + y * W;
          if (sy < 0 || sy >= static_cast<long long>(H)) {
            std::fill(d, d + W, T(0));
            continue;
          }
          const T* src = in + (c * H + static_cast<std::size_t>(sy)) * W;
          for (std::size_t x = 0; x < W; ++x) {
            const long long sx = static_cast<long long>(x) + dv;
            d[x] = (sx < 0 || sx >= static_cast<long long>(W)) ? T(0) : src[sx];
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, const LayerGeometry& L, T* out) {
  const std::size_t K = L.kernel_size, H = L.in_h, W = L.in_w;
  const long long half = static_cast<long long>(K / 2);
  std::size_t row = 0;
  for (std::size_t c = 0; c < L.in_channels; ++c)
    for (std::size_t u = 0; u < K; ++u)
      for (std::size_t v = 0; v < K; ++v, ++row) {
        const T* src = cols + row * H * W;
        const long long du = static_cast<long long>(u) - half, dv = static_cast<long long>(v) - half;
        for (std::size_t y = 0; y < H; ++y) {
          const long long sy = static_cast<long long>(y) + du;
          if (sy < 0 || sy >= static_cast<long long>(H)) continue;
          T* d = out + (c * H + static_cast<std::size_t>(sy)) * W;
          const T* s = src + y * W;
          for (std::size_t x = 0; x < W; ++x) {
            const long long sx = static_cast<long long>(x) + dv;
            if (sx >= 0 && sx < static_cast<long long>(W)) d[sx] += s[x];
          }
        }
      }
}

}  // namespace detail

// Per-sample activations kept for the backward pass.
template <typename T>
struct Workspace {
  std::vector<std::vector<T>> cols;     // im2col of each stack input
  std::vector<std::vector<T>> pre;      // conv output before ReLU
  std::vector<std::vector<T>> pooled;   // stack outputs
  std::vector<double> logits;
};

/// Forward pass of one sample of spec.input_size() values (channel-major).
template <typename T>
void forward_sample(const ConvClassifier<T>& m, std::span<const T> input, Workspace<T>& ws) {
  const auto& spec = m.spec;
  if (input.size() != spec.input_size())
    throw InputError("model expects " + std::to_string(spec.channels) + "x" + std::to_string(spec.height) + "x" +
                     std::to_string(spec.width) + " inputs, got " + std::to_string(input.size()) + " values");
  const std::size_t n_layers = m.geo.conv.size();
  ws.cols.resize(n_layers);
  ws.pre.resize(n_layers);
  ws.pooled.resize(n_layers);

  std::vector<T> standardized(input.begin(), input.end());
  if (!spec.input_offset.empty() || !spec.input_scale.empty()) {
    const std::size_t plane = spec.height * spec.width;
    for (std::size_t c = 0; c < spec.channels; ++c) {
      const T off = spec.input_offset.empty() ? T(0) : static_cast<T>(spec.input_offset[c]);
      const T inv = spec.input_scale.empty() ? T(1) : static_cast<T>(1.0 / spec.input_scale[c]);
      for (std::size_t i = 0; i < plane; ++i) standardized[c * plane + i] = (standardized[c * plane + i] - off) * inv;
    }
  }
  const T* x = standardized.data();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& L = m.geo.conv[l];
    const std::size_t hw = L.in_h * L.in_w;
    const std::size_t ckk = L.in_channels * L.kernel_size * L.kernel_size;
    ws.cols[l].resize(ckk * hw);
    detail::im2col(x, L, ws.cols[l].data());
    auto& pre = ws.pre[l];
    pre.assign(L.out_channels * hw, T(0));
    const T* W = m.params.data() + L.weight_offset;
    const T* b = m.params.data() + L.bias_offset;
    for (std::size_t k = 0; k < L.out_channels; ++k) {
      T* y = pre.data() + k * hw;
      std::fill(y, y + hw, b[k]);
      for (std::size_t r = 0; r < ckk; ++r) detail::axpy(W[k * ckk + r], ws.cols[l].data() + r * hw, y, hw);
    }
    auto& out = ws.pooled[l];
    out.assign(L.out_channels * L.out_h * L.out_w, T(0));
    const T inv_area = T(1) / static_cast<T>(L.pool * L.pool);
    for (std::size_t k = 0; k < L.out_channels; ++k)
      for (std::size_t oy = 0; oy < L.out_h; ++oy)
        for (std::size_t ox = 0; ox < L.out_w; ++ox) {
          T acc = 0;
          for (std::size_t dy = 0; dy < L.pool; ++dy)
            for (std::size_t dx = 0; dx < L.pool; ++dx) {
              const T v = pre[(k * L.in_h + oy * L.pool + dy) * L.in_w + ox * L.pool + dx];
              acc += v > T(0) ? v : T(0);
            }
          out[(k * L.out_h + oy) * L.out_w + ox] = acc * inv_area;
        }
    x = out.data();
  }
  ws.logits.assign(spec.classes, 0.0);
  const T* Wd = m.params.data() + m.geo.dense_weight_offset;
  const T* bd = m.params.data() + m.geo.dense_bias_offset;
  for (std::size_t c = 0; c < spec.classes; ++c)
    ws.logits[c] = static_cast<double>(detail::dot(Wd + c * m.geo.flat, x, m.geo.flat) + bd[c]);
}

/// Accumulates d(loss)/d(params) * scale into grad for one sample, given
/// d(loss)/d(logits). Requires the workspace of forward_sample.
template <typename T>
void backward_sample(const ConvClassifier<T>& m, const Workspace<T>& ws, std::span<const double> dlogits, T scale,
                     std::span<T> grad) {
  const auto& geo = m.geo;
  const std::size_t n_layers = geo.conv.size();
  if (n_layers == 0) throw ParameterError("backward needs at least one conv stack");
  const T* top = ws.pooled.back().data();

  std::vector<T> dx(geo.flat, T(0));
  const T* Wd = m.params.data() + geo.dense_weight_offset;
  for (std::size_t c = 0; c < m.spec.classes; ++c) {
    const T d = static_cast<T>(dlogits[c]) * scale;
    detail::axpy(d, top, grad.data() + geo.dense_weight_offset + c * geo.flat, geo.flat);
    grad[geo.dense_bias_offset + c] += d;
    detail::axpy(d, Wd + c * geo.flat, dx.data(), geo.flat);
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& L = geo.conv[l];
    const std::size_t hw = L.in_h * L.in_w;
    const std::size_t ckk = L.in_channels * L.kernel_size * L.kernel_size;
    // Through the pool and the ReLU.
    std::vector<T> dpre(L.out_channels * hw, T(0));
    const T inv_area = T(1) / static_cast<T>(L.pool * L.pool);
    const auto& pre = ws.pre[l];
    for (std::size_t k = 0; k < L.out_channels; ++k)
      for (std::size_t oy = 0; oy < L.out_h; ++oy)
        for (std::size_t ox = 0; ox < L.out_w; ++ox) {
          const T g = dx[(k * L.out_h + oy) * L.out_w + ox] * inv_area;
          for (std::size_t dy = 0; dy < L.pool; ++dy)
            for (std::size_t ddx = 0; ddx < L.pool; ++ddx) {
              const std::size_t idx = (k * L.in_h + oy * L.pool + dy) * L.in_w + ox * L.pool + ddx;
              if (pre[idx] > T(0)) dpre[idx] = g;
            }
        }
    const T* W = m.params.data() + L.weight_offset;
    T* dW = grad.data() + L.weight_offset;
    T* db = grad.data() + L.bias_offset;
    const T* cols = ws.cols[l].data();
    for (std::size_t k = 0; k < L.out_channels; ++k) {
      const T* dy = dpre.data() + k * hw;
      T sum = 0;
      for (std::size_t p = 0; p < hw; ++p) sum += dy[p];
      db[k] += sum;
      for (std::size_t r = 0; r < ckk; ++r) dW[k * ckk + r] += detail::dot(dy, cols + r * hw, hw);
    }
    if (l == 0) break;
    std::vector<T> dcols(ckk * hw, T(0));
    for (std::size_t k = 0; k < L.out_channels; ++k)
      for (std::size_t r = 0; r < ckk; ++r) detail::axpy(W[k * ckk + r], dpre.data() + k * hw, dcols.data() + r * hw, hw);
    dx.assign(L.in_channels * hw, T(0));
    detail::col2im_add(dcols.data(), L, dx.data());
  }
}

/// Logits for a batch (rows = samples).
template <typename T>
Matrix<double> forward(const ConvClassifier<T>& m, std::span<const std::span<const T>> batch) {
  Matrix<double> out(batch.size(), m.spec.classes);
  Workspace<T> ws;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_sample(m, batch[i], ws);
    std::copy(ws.logits.begin(), ws.logits.end(), out.row(i).begin());
  }
  return out;
}

/// Mean AT loss over the batch plus l2_weight * |W|^2.
template <typename T>
double batch_loss(const ConvClassifier<T>& m, std::span<const std::span<const T>> batch,
                  std::span<const std::size_t> labels, const ATConfig& at) {
  if (batch.size() != labels.size() || batch.empty()) throw InputError("batch and labels must be non-empty and equal in size");
  const auto logits = forward(m, batch);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    loss += at_loss(one_hot(labels[i], m.spec.classes), logits.row(i), at);
  return loss / static_cast<double>(batch.size()) + m.spec.l2_weight * m.weight_norm2();
}

/// Gradient of batch_loss into `grad` (overwritten); returns the loss.
/// With threads > 1 the batch is cut into contiguous chunks whose partial
/// gradients are summed in chunk order, so results are reproducible for a
/// given thread count but differ from serial in rounding.
template <typename T>
double loss_and_gradient(const ConvClassifier<T>& m, std::span<const std::span<const T>> batch,
                         std::span<const std::size_t> labels, const ATConfig& at, std::vector<T>& grad,
                         unsigned threads = 1) {
  if (batch.size() != labels.size() || batch.empty()) throw InputError("batch and labels must be non-empty and equal in size");
  const std::size_t n = batch.size();
  const T scale = T(1) / static_cast<T>(n);
  const std::size_t chunks = std::clamp<std::size_t>(threads, 1, n);

  std::vector<std::vector<T>> partial(chunks, std::vector<T>(m.params.size(), T(0)));
  std::vector<double> losses(n, 0.0);
  auto work = [&](std::size_t chunk) {
    Workspace<T> ws;
    const std::size_t begin = chunk * n / chunks, end = (chunk + 1) * n / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      forward_sample(m, batch[i], ws);
      const auto y = one_hot(labels[i], m.spec.classes);
      losses[i] = at_loss(y, ws.logits, at);
      const auto d = at_loss_grad(y, ws.logits, at);
      backward_sample(m, ws, d, scale, std::span<T>(partial[chunk]));
    }
  };
  if (chunks == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < chunks; ++c) pool.emplace_back(work, c);
    for (auto& t : pool) t.join();
  }

  grad.assign(m.params.size(), T(0));
  for (const auto& p : partial)
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += p[i];
  const T two_lambda = static_cast<T>(2.0 * m.spec.l2_weight);
  if (two_lambda != T(0)) {
    for (const auto& L : m.geo.conv)
      for (std::size_t i = L.weight_offset; i < L.bias_offset; ++i) grad[i] += two_lambda * m.params[i];
    for (std::size_t i = m.geo.dense_weight_offset; i < m.geo.dense_bias_offset; ++i) grad[i] += two_lambda * m.params[i];
  }
  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss / static_cast<double>(n) + m.spec.l2_weight * m.weight_norm2();
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  std::vector<double> m, v;
};

/// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps), step_index >= 1.
template <typename T>
void adam_step(ConvClassifier<T>& model, std::span<const T> grad, AdamState& state, const AdamConfig& cfg,
               std::size_t step_index) {
  if (step_index < 1) throw ParameterError("adam step index starts at 1");
  if (grad.size() != model.params.size()) throw InputError("gradient size does not match the model");
  if (state.m.size() != grad.size()) {
    state.m.assign(grad.size(), 0.0);
    state.v.assign(grad.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double step = cfg.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.epsilon);
    model.params[i] = static_cast<T>(static_cast<double>(model.params[i]) - step);
  }
}

}  // namespace sbx
