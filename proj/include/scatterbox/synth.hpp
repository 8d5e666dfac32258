#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "scatterbox/dataset.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/rng.hpp"
#include "scatterbox/signal.hpp"
#include "scatterbox/wav.hpp"

// Six-class tone corpus: every class has its own fundamental and its own
// amplitude-modulation rate. Per clip, both are jittered, harmonic phases are
// random and a little white noise is added.

namespace sbx {

struct SynthClass {
  std::string label;
  double f0 = 0.0;       // Hz
  double am_rate = 0.0;  // Hz
};

struct SynthConfig {
  std::size_t clips_per_class = 200;
  std::size_t length = 44100;  // samples
  int sample_rate = 44100;
  double f0_jitter = 0.04;       // relative, uniform +-
  double am_rate_jitter = 0.1;   // relative, uniform +-
  double am_depth = 0.8;
  std::size_t harmonics = 4;     // amplitude 1/h
  double noise = 0.01;           // std relative to the clip peak
  double peak = 0.5;
};

/// Fundamentals four semitones apart from G3, modulation from 2 to 12 Hz.
inline std::vector<SynthClass> default_synth_classes() {
  const auto& names = default_classes();
  const double f0[] = {196.0, 247.0, 311.0, 392.0, 494.0, 622.0};
  const double am[] = {2.0, 4.0, 6.0, 8.0, 10.0, 12.0};
  std::vector<SynthClass> out;
  for (std::size_t c = 0; c < names.size(); ++c) out.push_back({names[c], f0[c], am[c]});
  return out;
}

inline SampledSignal synth_clip(const SynthClass& cls, const SynthConfig& cfg, SplitMix64& rng) {
  if (cfg.length == 0 || cfg.sample_rate <= 0 || cfg.harmonics == 0)
    throw ParameterError("synthetic clips need a positive length, sample rate and harmonic count");
  if (cfg.am_depth < 0.0 || cfg.am_depth > 1.0) throw ParameterError("modulation depth must lie in [0, 1]");
  const double two_pi = 2.0 * std::numbers::pi;
  const double fs = cfg.sample_rate;
  const double f0 = cls.f0 * (1.0 + cfg.f0_jitter * rng.uniform(-1.0, 1.0));
  const double rate = cls.am_rate * (1.0 + cfg.am_rate_jitter * rng.uniform(-1.0, 1.0));
  const double am_phase = rng.uniform(0.0, two_pi);
  std::vector<double> phase(cfg.harmonics);
  for (double& p : phase) p = rng.uniform(0.0, two_pi);

  SampledSignal out{std::vector<double>(cfg.length), cfg.sample_rate};
  for (std::size_t n = 0; n < cfg.length; ++n) {
    const double t = static_cast<double>(n) / fs;
    double tone = 0.0;
    for (std::size_t h = 1; h <= cfg.harmonics; ++h)
      if (h * f0 < fs / 2) tone += std::sin(two_pi * static_cast<double>(h) * f0 * t + phase[h - 1]) / static_cast<double>(h);
    const double envelope = 1.0 - 0.5 * cfg.am_depth * (1.0 - std::cos(two_pi * rate * t + am_phase));
    out.samples[n] = envelope * tone;
  }
  double top = 0.0;
  for (double v : out.samples) top = std::max(top, std::abs(v));
  for (double& v : out.samples) v = cfg.peak * (v / top + cfg.noise * rng.normal());
  return out;
}

struct SynthClip {
  std::string label;
  std::string name;  // <label>/<label>_<index>.wav
  SampledSignal signal;
};

/// All clips, class by class. Each class draws from its own fork of the
/// seed, so adding clips to one class never changes another.
inline std::vector<SynthClip> synth_corpus(const std::vector<SynthClass>& classes, const SynthConfig& cfg,
                                           std::uint64_t seed) {
  std::vector<SynthClip> out;
  SplitMix64 root(seed);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    SplitMix64 rng = root.fork(c);
    for (std::size_t i = 0; i < cfg.clips_per_class; ++i) {
      char index[16];
      std::snprintf(index, sizeof index, "%04zu", i);
      out.push_back({classes[c].label, classes[c].label + "/" + classes[c].label + "_" + index + ".wav",
                     synth_clip(classes[c], cfg, rng)});
    }
  }
  return out;
}

/// Writes the corpus as 16-bit mono WAV files under `dir`, one folder per class.
inline void write_synth_corpus(const std::filesystem::path& dir, const std::vector<SynthClip>& clips) {
  for (const auto& clip : clips) {
    const auto path = dir / clip.name;
    std::filesystem::create_directories(path.parent_path());
    write_wav(path, clip.signal);
  }
}

}  // namespace sbx
