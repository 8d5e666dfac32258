#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scatterbox/array.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/fft.hpp"
#include "scatterbox/rng.hpp"

namespace sbx {

// Mono audio buffer. Samples are in [-1, 1] after 16-bit normalization.
struct SampledSignal {
  std::vector<double> samples;
  int sample_rate = 44100;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

inline void validate(const SampledSignal& s) {
  if (s.sample_rate <= 0) throw InputError("sample rate must be positive");
  for (double v : s.samples)
    if (!std::isfinite(v)) throw InputError("signal contains non-finite samples");
}

enum class WindowKind { tukey, hann, gauss, rectangular };

inline std::string to_string(WindowKind k) {
  switch (k) {
    case WindowKind::tukey: return "tukey";
    case WindowKind::hann: return "hann";
    case WindowKind::gauss: return "gauss";
    case WindowKind::rectangular: return "rectangular";
  }
  return "?";
}

inline WindowKind window_kind_from_string(const std::string& name) {
  if (name == "tukey") return WindowKind::tukey;
  if (name == "hann") return WindowKind::hann;
  if (name == "gauss") return WindowKind::gauss;
  if (name == "rectangular" || name == "rect") return WindowKind::rectangular;
  throw ParameterError("unknown window kind '" + name + "'");
}

// shape_param: taper fraction for tukey, standard deviation (samples) for gauss,
// ignored otherwise.
struct WindowSpec {
  WindowKind kind = WindowKind::hann;
  std::size_t length = 1;
  double shape_param = 0.0;

  bool operator==(const WindowSpec&) const = default;
};

/// Symmetric window of spec.length samples, values in [0, 1]. Tukey with
/// shape 0 is rectangular and with shape 1 is Hann, pointwise.
inline std::vector<double> make_window(const WindowSpec& spec) {
  if (spec.length == 0) throw ParameterError("window length must be at least 1");
  const std::size_t n = spec.length;
  std::vector<double> w(n, 1.0);
  if (n == 1) {
    if (spec.kind == WindowKind::tukey && !(spec.shape_param >= 0.0 && spec.shape_param <= 1.0))
      throw ParameterError("tukey shape parameter must lie in [0, 1]");
    if (spec.kind == WindowKind::gauss && !(spec.shape_param > 0.0))
      throw ParameterError("gauss standard deviation must be positive");
    return w;
  }
  const double denom = static_cast<double>(n - 1);
  switch (spec.kind) {
    case WindowKind::rectangular:
      break;
    case WindowKind::hann:
      for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
      break;
    case WindowKind::tukey: {
      const double a = spec.shape_param;
      if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("tukey shape parameter must lie in [0, 1]");
      if (a == 0.0) break;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / denom;
        if (x < a / 2.0)
          w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / a - 1.0)));
        else if (x > 1.0 - a / 2.0)
          w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / a - 2.0 / a + 1.0)));
      }
      break;
    }
    case WindowKind::gauss: {
      const double sigma = spec.shape_param;
      if (!(sigma > 0.0)) throw ParameterError("gauss standard deviation must be positive");
      const double mid = denom / 2.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = (static_cast<double>(i) - mid) / sigma;
        w[i] = std::exp(-0.5 * z * z);
      }
      break;
    }
  }
  // Symmetrize exactly; cos() rounding can differ in the last ulp between mirrored indices.
  for (std::size_t i = 0; i < n / 2; ++i) w[n - 1 - i] = w[i];
  for (double& v : w) v = std::clamp(v, 0.0, 1.0);
  return w;
}

// One Gabor transform layer: window g, time step `hop` (alpha) and a DFT of
// fft_size points whose lowest kept_channels non-negative bins are retained
// (beta = sample_rate / fft_size).
struct GaborParams {
  WindowSpec window{WindowKind::hann, 1024, 0.0};
  std::size_t hop = 275;
  std::size_t fft_size = 1024;
  std::size_t kept_channels = 480;
  std::size_t frame_count = 160;

  bool operator==(const GaborParams&) const = default;
};

inline void validate(const GaborParams& p) {
  if (p.hop < 1) throw ParameterError("hop must be at least 1");
  if (p.fft_size < 1) throw ParameterError("fft_size must be at least 1");
  if (p.window.length < 1 || p.window.length > p.fft_size)
    throw ParameterError("window length must lie in [1, fft_size]");
  if (p.kept_channels < 1 || p.kept_channels > p.fft_size / 2 + 1)
    throw ParameterError("kept_channels must lie in [1, fft_size/2 + 1]");
  if (p.frame_count < 1) throw ParameterError("frame_count must be at least 1");
}

struct ComplexTFMatrix {
  Matrix<cplx> values;  // kept_channels x frame_count
  GaborParams params;
};

// Reflection padding that makes exactly frame_count windows fit: the shortfall
// (frame_count-1)*hop + window_length - signal_length is split between the
// front (floor half) and back.
struct FramePadding {
  std::size_t front = 0;
  std::size_t back = 0;
};

inline FramePadding frame_padding(const GaborParams& p, std::size_t signal_length) {
  const std::size_t needed = (p.frame_count - 1) * p.hop + p.window.length;
  if (needed <= signal_length) return {};
  const std::size_t total = needed - signal_length;
  return {total / 2, total - total / 2};
}

// Index into x[0..n) with mirror reflection about the edge samples (edge not repeated).
inline std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<long long>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

/// Sampled Gabor transform. Entry (j, k) is <f, M_{beta j} T_{alpha k} g>
///   = sum_t f(t) g(t - t_k) exp(-2 pi i j t / fft_size),
/// where t runs over the reflection-extended signal in its own time
/// coordinate and t_k = alpha*k - front is the first sample of window k.
inline ComplexTFMatrix gabor_transform(std::span<const double> signal, const GaborParams& params) {
  validate(params);
  if (signal.empty()) throw InputError("gabor_transform: empty signal");
  const auto pad = frame_padding(params, signal.size());
  const auto window = make_window(params.window);
  const FftPlan plan(params.fft_size);
  const std::size_t n = params.fft_size;

  ComplexTFMatrix out{Matrix<cplx>(params.kept_channels, params.frame_count), params};
  std::vector<cplx> buffer(n);
  for (std::size_t k = 0; k < params.frame_count; ++k) {
    const long long start = static_cast<long long>(k * params.hop) - static_cast<long long>(pad.front);
    std::fill(buffer.begin(), buffer.end(), cplx{0.0, 0.0});
    for (std::size_t m = 0; m < window.size(); ++m)
      buffer[m] = signal[reflect_index(start + static_cast<long long>(m), signal.size())] * window[m];
    plan.forward(buffer);
    // Shift the window-local phase reference back to absolute time.
    for (std::size_t j = 0; j < params.kept_channels; ++j)
      out.values(j, k) = buffer[j] * plan.twiddle(start * static_cast<long long>(j));
  }
  return out;
}

inline ComplexTFMatrix gabor_transform(const SampledSignal& signal, const GaborParams& params) {
  if (signal.empty()) throw InputError("gabor_transform: empty signal");
  validate(signal);
  return gabor_transform(std::span<const double>(signal.samples), params);
}

/// Coefficient energy of a real signal's transform, normalized so that an
/// orthonormal system gives ||f||^2: kept bins 1..N/2-1 stand in for their
/// negative-frequency mirrors (weight 2) and the DFT is scaled to be unitary.
inline double coefficient_energy(const ComplexTFMatrix& tf) {
  const std::size_t n = tf.params.fft_size;
  double energy = 0.0;
  for (std::size_t j = 0; j < tf.values.rows(); ++j) {
    const bool unpaired = j == 0 || (n % 2 == 0 && j == n / 2);
    const double weight = unpaired ? 1.0 : 2.0;
    double row = 0.0;
    for (std::size_t k = 0; k < tf.values.cols(); ++k) row += std::norm(tf.values(j, k));
    energy += weight * row;
  }
  return energy / static_cast<double>(n);
}

struct FrameBoundEstimate {
  double lower = 0.0;  // A_est
  double upper = 0.0;  // B_est
};

/// Empirical frame bounds: min and max of coefficient_energy(f)/||f||^2 over
/// `trials` unit-norm Gaussian signals of the given length.
inline FrameBoundEstimate frame_bounds(const GaborParams& params, std::size_t signal_length,
                                       std::size_t trials, std::uint64_t seed) {
  validate(params);
  if (trials < 1) throw ParameterError("frame_bounds: trials must be at least 1");
  if (signal_length < 1) throw ParameterError("frame_bounds: signal length must be positive");
  SplitMix64 rng(seed);
  FrameBoundEstimate est{std::numeric_limits<double>::infinity(), 0.0};
  std::vector<double> f(signal_length);
  for (std::size_t t = 0; t < trials; ++t) {
    double norm2 = 0.0;
    for (double& v : f) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double scale = 1.0 / std::sqrt(norm2);
    for (double& v : f) v *= scale;
    const double ratio = coefficient_energy(gabor_transform(std::span<const double>(f), params));
    est.lower = std::min(est.lower, ratio);
    est.upper = std::max(est.upper, ratio);
  }
  return est;
}

// |z| entrywise.
inline Matrix<double> magnitude(const Matrix<cplx>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = std::abs(m.values()[i]);
  return out;
}

}  // namespace sbx
