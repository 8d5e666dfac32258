#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "scatterbox/array.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/mel.hpp"
#include "scatterbox/signal.hpp"

namespace sbx {

// MT: mel-spectrogram, MS: Mel scattering, GS: Gabor scattering.
enum class Representation : std::uint8_t { mt = 1, ms = 2, gs = 3 };

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::mt: return "mt";
    case Representation::ms: return "ms";
    case Representation::gs: return "gs";
  }
  return "?";
}

inline Representation representation_from_string(const std::string& s) {
  if (s == "mt" || s == "MT") return Representation::mt;
  if (s == "ms" || s == "MS") return Representation::ms;
  if (s == "gs" || s == "GS") return Representation::gs;
  throw ParameterError("unknown representation '" + s + "' (expected mt, ms or gs)");
}

// How the second-layer modulation axis collapses into output channel C.
enum class Layer2Aggregation { sum, single_bin };

struct ScatteringConfig {
  GaborParams layer1;
  GaborParams layer2;  // runs along the frame axis of layer 1
  WindowSpec atom1{WindowKind::hann, 8, 0.0};
  WindowSpec atom2{WindowKind::hann, 8, 0.0};
  std::optional<MelFilterBank> mel;  // present for MT and MS
  Layer2Aggregation aggregation = Layer2Aggregation::sum;
  std::size_t aggregation_bin = 1;  // used by single_bin
  bool log_compress = false;        // log(1 + x) on every output channel
  int sample_rate = 44100;
};

struct FeatureTensor {
  Representation kind = Representation::mt;
  Tensor3<double> values;  // channels x freq_bins x frames

  std::size_t channels() const { return values.dim0(); }
  std::size_t freq_bins() const { return values.dim1(); }
  std::size_t frames() const { return values.dim2(); }
};

/// Defaults for one-second segments at 44.1 kHz: layer 1 is a 1024-point
/// Hann lattice with hop 275 reflected out to 160 frames keeping the lowest
/// 480 bins (GS: 3x480x160); MT and MS average those bins with 120 mel
/// filters (1x120x160, 3x120x160) spanning 0 Hz up to the highest kept bin.
/// Layer 2 uses a 32-point Hann window with hop 1 along the 160 frames.
inline ScatteringConfig default_config(Representation kind) {
  ScatteringConfig cfg;
  cfg.layer1 = GaborParams{{WindowKind::hann, 1024, 0.0}, 275, 1024, 480, 160};
  cfg.layer2 = GaborParams{{WindowKind::hann, 32, 0.0}, 1, 32, 17, 160};
  if (kind != Representation::gs) {
    const double bin_hz = cfg.sample_rate / static_cast<double>(cfg.layer1.fft_size);
    cfg.mel = build_mel_bank(cfg.sample_rate, cfg.layer1.fft_size, cfg.layer1.kept_channels, 120, 0.0,
                             static_cast<double>(cfg.layer1.kept_channels - 1) * bin_hz);
  }
  return cfg;
}

/// Reduced lattice for quick experiments on one-second clips: 32 frames
/// (hop 1378), the lowest 64 bins (about 2.7 kHz), 16 mel filters over that
/// band, a 16-point layer-2 window and 4-point atoms. Shapes: GS 3x64x32,
/// MS 3x16x32, MT 1x16x32.
inline ScatteringConfig compact_config(Representation kind) {
  ScatteringConfig cfg;
  cfg.layer1 = GaborParams{{WindowKind::hann, 1024, 0.0}, 1378, 1024, 64, 32};
  cfg.layer2 = GaborParams{{WindowKind::hann, 16, 0.0}, 1, 16, 9, 32};
  cfg.atom1 = {WindowKind::hann, 4, 0.0};
  cfg.atom2 = {WindowKind::hann, 4, 0.0};
  if (kind != Representation::gs) {
    const double bin_hz = cfg.sample_rate / static_cast<double>(cfg.layer1.fft_size);
    cfg.mel = build_mel_bank(cfg.sample_rate, cfg.layer1.fft_size, cfg.layer1.kept_channels, 16, 0.0,
                             static_cast<double>(cfg.layer1.kept_channels - 1) * bin_hz);
  }
  return cfg;
}

/// First layer: |<f, M_{beta j} T_{alpha k} g1>|, or its mel-weighted sum
/// over j when cfg.mel is present.
inline Matrix<double> layer1(const SampledSignal& signal, const ScatteringConfig& cfg) {
  auto modulus = magnitude(gabor_transform(signal, cfg.layer1).values);
  if (cfg.mel) return apply_bank(*cfg.mel, modulus);
  return modulus;
}

/// Same-length convolution of each row with the unit-sum atom (reflection at
/// both ends), then every hop-th column: y[k] = sum_m a[m] x[k + c - m] with
/// c = (len - 1) / 2.
inline Matrix<double> output_atom(const Matrix<double>& layer, const WindowSpec& atom, std::size_t hop) {
  if (hop < 1) throw ParameterError("output_atom: hop must be at least 1");
  if (atom.length > layer.cols())
    throw ParameterError("output_atom: atom length " + std::to_string(atom.length) +
                         " exceeds frame axis " + std::to_string(layer.cols()));
  auto weights = make_window(atom);
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ParameterError("output_atom: atom has zero sum");
  for (double& w : weights) w /= total;

  const std::size_t frames = layer.cols();
  const std::size_t out_frames = (frames + hop - 1) / hop;
  const long long center = static_cast<long long>((atom.length - 1) / 2);
  Matrix<double> out(layer.rows(), out_frames);
  for (std::size_t r = 0; r < layer.rows(); ++r) {
    const auto src = layer.row(r);
    auto dst = out.row(r);
    for (std::size_t q = 0; q < out_frames; ++q) {
      const long long k = static_cast<long long>(q * hop);
      double acc = 0.0;
      for (std::size_t m = 0; m < weights.size(); ++m)
        acc += weights[m] * src[reflect_index(k + center - static_cast<long long>(m), frames)];
      dst[q] = acc;
    }
  }
  return out;
}

/// Second layer: the layer-2 Gabor transform of every frequency row of f1,
/// in modulus. Result is freq_bins x modulation_bins x frames.
inline Tensor3<double> layer2(const Matrix<double>& f1, const ScatteringConfig& cfg) {
  validate(cfg.layer2);
  Tensor3<double> out(f1.rows(), cfg.layer2.kept_channels, cfg.layer2.frame_count);
  for (std::size_t j = 0; j < f1.rows(); ++j) {
    const auto tf = gabor_transform(f1.row(j), cfg.layer2);
    for (std::size_t h = 0; h < tf.values.rows(); ++h)
      for (std::size_t m = 0; m < tf.values.cols(); ++m) out(j, h, m) = std::abs(tf.values(h, m));
  }
  return out;
}

namespace detail {

inline void check_kind(const ScatteringConfig& cfg, Representation kind) {
  const bool wants_mel = kind != Representation::gs;
  if (wants_mel != cfg.mel.has_value())
    throw ParameterError(to_string(kind) + (wants_mel ? " requires" : " must not have") +
                         " a mel filter bank in its configuration");
  if (cfg.mel && cfg.mel->kept_channels() != cfg.layer1.kept_channels)
    throw ParameterError("mel bank kept_channels differs from layer-1 kept_channels");
  if (cfg.mel && cfg.mel->sample_rate != cfg.sample_rate)
    throw ParameterError("mel bank sample rate differs from configuration sample rate");
}

inline void put_channel(Tensor3<double>& t, std::size_t c, const Matrix<double>& m, bool log_compress) {
  auto slab = t.slab(c);
  for (std::size_t i = 0; i < m.size(); ++i)
    slab[i] = log_compress ? std::log1p(m.values()[i]) : m.values()[i];
}

}  // namespace detail

/// Channel C: atom2-smoothed second layer, collapsed over modulation bins
/// h >= 1 (sum) or taken at a single bin.
inline Matrix<double> aggregate_layer2(const Tensor3<double>& f2, const ScatteringConfig& cfg) {
  const std::size_t freq = f2.dim0(), mods = f2.dim1(), frames = f2.dim2();
  std::size_t h_begin = 1, h_end = mods;
  if (cfg.aggregation == Layer2Aggregation::single_bin) {
    if (cfg.aggregation_bin >= mods) throw ParameterError("aggregation bin outside modulation range");
    h_begin = cfg.aggregation_bin;
    h_end = h_begin + 1;
  }
  Matrix<double> out(freq, frames);
  Matrix<double> row(h_end - h_begin, frames);
  for (std::size_t j = 0; j < freq; ++j) {
    for (std::size_t h = h_begin; h < h_end; ++h)
      for (std::size_t m = 0; m < frames; ++m) row(h - h_begin, m) = f2(j, h, m);
    const auto smoothed = output_atom(row, cfg.atom2, 1);
    auto dst = out.row(j);
    for (std::size_t h = 0; h < smoothed.rows(); ++h) {
      const auto src = smoothed.row(h);
      for (std::size_t m = 0; m < frames; ++m) dst[m] += src[m];
    }
  }
  return out;
}

/// MT -> 1 channel, mel-averaged squared modulus of layer 1.
/// GS/MS -> 3 channels: A = layer1, B = atom1 * A, C = aggregate(atom2 * layer2(A)).
inline FeatureTensor assemble(const SampledSignal& signal, const ScatteringConfig& cfg, Representation kind) {
  detail::check_kind(cfg, kind);
  if (signal.sample_rate != cfg.sample_rate)
    throw InputError("signal sample rate " + std::to_string(signal.sample_rate) +
                     " differs from configured " + std::to_string(cfg.sample_rate));
  FeatureTensor out;
  out.kind = kind;
  if (kind == Representation::mt) {
    auto power = magnitude(gabor_transform(signal, cfg.layer1).values);
    for (double& v : power.values()) v *= v;
    const auto mel = apply_bank(*cfg.mel, power);
    out.values = Tensor3<double>(1, mel.rows(), mel.cols());
    detail::put_channel(out.values, 0, mel, cfg.log_compress);
    return out;
  }
  if (cfg.layer2.frame_count != cfg.layer1.frame_count)
    throw ParameterError("layer-2 frame_count must equal layer-1 frame_count so channels align");

  const auto a = layer1(signal, cfg);
  const auto b = output_atom(a, cfg.atom1, 1);
  const auto c = aggregate_layer2(layer2(a, cfg), cfg);
  out.values = Tensor3<double>(3, a.rows(), a.cols());
  detail::put_channel(out.values, 0, a, cfg.log_compress);
  detail::put_channel(out.values, 1, b, cfg.log_compress);
  detail::put_channel(out.values, 2, c, cfg.log_compress);
  return out;
}

}  // namespace sbx
