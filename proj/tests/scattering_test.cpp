#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "scatterbox/scattering.hpp"

using namespace sbx;

namespace {

SampledSignal noise_signal(std::uint64_t seed, std::size_t n) {
  SplitMix64 rng(seed);
  return {oracle::random_signal(rng, n), 44100};
}

SampledSignal tone(double hz, std::size_t n, double amplitude = 0.5) {
  SampledSignal s{std::vector<double>(n), 44100};
  for (std::size_t t = 0; t < n; ++t)
    s.samples[t] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(t) / 44100.0);
  return s;
}

// Small lattice so layer-level tests stay fast.
ScatteringConfig small_config(bool with_mel) {
  ScatteringConfig cfg;
  cfg.layer1 = GaborParams{{WindowKind::hann, 256, 0.0}, 64, 256, 100, 48};
  cfg.layer2 = GaborParams{{WindowKind::hann, 16, 0.0}, 1, 16, 9, 48};
  cfg.atom1 = {WindowKind::hann, 5, 0.0};
  cfg.atom2 = {WindowKind::hann, 5, 0.0};
  if (with_mel) cfg.mel = build_mel_bank(44100, 256, 100, 20, 0.0, 99 * 44100.0 / 256);
  return cfg;
}

}  // namespace

TEST(Layer1, ZeroSignal) {
  const auto out = layer1(SampledSignal{std::vector<double>(3000, 0.0), 44100}, small_config(false));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Layer1, ModulusOfDirectCoefficients) {
  const auto cfg = small_config(false);
  const auto sig = noise_signal(1, 3000);
  const auto out = layer1(sig, cfg);
  const auto ref = oracle::direct_gabor(sig.samples, cfg.layer1);
  double scale = 0.0;
  for (const auto& z : ref.values()) scale = std::max(scale, std::abs(z));
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(out.values()[i], std::abs(ref.values()[i]), 1e-10 * scale);
}

TEST(Layer1, SignIsDiscarded) {
  const auto cfg = small_config(true);
  auto sig = noise_signal(2, 3000);
  const auto a = layer1(sig, cfg);
  for (double& v : sig.samples) v = -v;
  EXPECT_EQ(layer1(sig, cfg), a);
}

TEST(OutputAtom, DeltaIsIdentity) {
  SplitMix64 rng(1);
  Matrix<double> m(3, 17);
  for (double& v : m.values()) v = rng.uniform();
  EXPECT_EQ(output_atom(m, {WindowKind::rectangular, 1, 0.0}, 1), m);
}

TEST(OutputAtom, PreservesConstantRows) {
  Matrix<double> m(4, 20);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 20; ++k) m(r, k) = 1.5 + static_cast<double>(r);
  for (std::size_t hop : {1u, 3u}) {
    const auto out = output_atom(m, {WindowKind::hann, 8, 0.0}, hop);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t k = 0; k < out.cols(); ++k) EXPECT_NEAR(out(r, k), 1.5 + static_cast<double>(r), 1e-14);
  }
}

TEST(OutputAtom, MatchesConvolutionOracle) {
  SplitMix64 rng(9);
  Matrix<double> m(4, 32);
  for (double& v : m.values()) v = rng.uniform();
  const WindowSpec atom{WindowKind::hann, 5, 0.0};
  auto weights = make_window(atom);
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  const auto out = output_atom(m, atom, 2);
  const auto ref = oracle::convolve_then_subsample(m, weights, 2);
  ASSERT_EQ(out.cols(), 16u);
  EXPECT_LE(oracle::max_rel_error(out, ref), 1e-12);
}

TEST(OutputAtom, NonNegativeStaysNonNegative) {
  SplitMix64 rng(10);
  Matrix<double> m(6, 40);
  for (double& v : m.values()) v = rng.uniform();
  const auto out = output_atom(m, {WindowKind::gauss, 9, 2.0}, 2);
  for (double v : out.values()) EXPECT_GE(v, 0.0);
}

TEST(OutputAtom, AtomLongerThanFrameAxis) {
  EXPECT_THROW(output_atom(Matrix<double>(2, 4), {WindowKind::hann, 5, 0.0}, 1), ParameterError);
}

TEST(Layer2, ZeroInput) {
  const auto out = layer2(Matrix<double>(5, 48), small_config(false));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Layer2, ConstantRowOnlyCarriesWindowLeakage) {
  // A constant row c has no modulation; bin h can only hold c * |G(h)|,
  // the window's own spectrum. A rectangular window leaks nothing.
  auto cfg = small_config(false);
  Matrix<double> f1(2, 48, 3.0);
  const auto g = make_window(cfg.layer2.window);
  const auto out = layer2(f1, cfg);
  for (std::size_t h = 0; h < cfg.layer2.kept_channels; ++h) {
    cplx spectrum{0.0, 0.0};
    for (std::size_t n = 0; n < g.size(); ++n)
      spectrum += g[n] * std::exp(cplx(0.0, -2.0 * std::numbers::pi * static_cast<double>(h * n) / 16.0));
    for (std::size_t m = 0; m < 48; ++m) EXPECT_NEAR(out(1, h, m), 3.0 * std::abs(spectrum), 1e-12);
    if (h > 0) {
      EXPECT_LT(out(1, h, 20), out(1, 0, 20));
    }
  }
  cfg.layer2.window = {WindowKind::rectangular, 16, 0.0};
  const auto flat = layer2(f1, cfg);
  for (std::size_t h = 1; h < cfg.layer2.kept_channels; ++h)
    for (std::size_t m = 0; m < 48; ++m) EXPECT_NEAR(flat(0, h, m), 0.0, 1e-12);
}

TEST(Layer2, AmplitudeModulationPeaksAtItsRate) {
  auto cfg = small_config(false);
  cfg.layer2 = GaborParams{{WindowKind::rectangular, 16, 0.0}, 1, 16, 9, 48};
  for (double rate : {2.0 / 16, 3.0 / 16, 5.0 / 16, 0.28, 0.4}) {
    Matrix<double> f1(1, 48);
    for (std::size_t k = 0; k < 48; ++k)
      f1(0, k) = 1.0 + 0.6 * std::cos(2.0 * std::numbers::pi * rate * static_cast<double>(k));
    const auto out = layer2(f1, cfg);
    const auto expected = static_cast<long>(std::lround(rate * 16));
    for (std::size_t m = 12; m < 36; ++m) {
      std::size_t best = 1;
      for (std::size_t h = 2; h < out.dim1(); ++h)
        if (out(0, h, m) > out(0, best, m)) best = h;
      EXPECT_LE(std::abs(static_cast<long>(best) - expected), 1) << "rate " << rate;
    }
  }
}

TEST(Assemble, KindMustMatchConfiguration) {
  const auto sig = noise_signal(3, 3000);
  EXPECT_THROW(assemble(sig, small_config(false), Representation::ms), ParameterError);
  EXPECT_THROW(assemble(sig, small_config(false), Representation::mt), ParameterError);
  EXPECT_THROW(assemble(sig, small_config(true), Representation::gs), ParameterError);
  auto cfg = small_config(false);
  cfg.layer2.frame_count = 40;
  EXPECT_THROW(assemble(sig, cfg, Representation::gs), ParameterError);
}

TEST(Assemble, DefaultShapesForOneSecond) {
  const auto sig = noise_signal(4, 44100);
  const struct {
    Representation kind;
    std::size_t c, f, t;
  } cases[] = {{Representation::gs, 3, 480, 160}, {Representation::ms, 3, 120, 160}, {Representation::mt, 1, 120, 160}};
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = assemble(sig, default_config(c.kind), c.kind);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(out.channels(), c.c);
    EXPECT_EQ(out.freq_bins(), c.f);
    EXPECT_EQ(out.frames(), c.t);
    EXPECT_LT(seconds, 2.0) << to_string(c.kind);
    for (double v : out.values.values()) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
    }
  }
}

TEST(Assemble, CompactShapes) {
  const auto sig = noise_signal(4, 44100);
  EXPECT_EQ(assemble(sig, compact_config(Representation::gs), Representation::gs).values.dim1(), 64u);
  const auto ms = assemble(sig, compact_config(Representation::ms), Representation::ms);
  EXPECT_EQ(ms.channels(), 3u);
  EXPECT_EQ(ms.freq_bins(), 16u);
  EXPECT_EQ(ms.frames(), 32u);
}

TEST(Assemble, ZeroSignalGivesZeroTensor) {
  const SampledSignal zero{std::vector<double>(44100, 0.0), 44100};
  for (auto kind : {Representation::gs, Representation::ms, Representation::mt}) {
    const auto out = assemble(zero, compact_config(kind), kind);
    for (double v : out.values.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Assemble, MelScatteringIsMelAveragedGaborScattering) {
  const auto sig = noise_signal(5, 44100);
  const auto gs = assemble(sig, default_config(Representation::gs), Representation::gs);
  const auto ms_cfg = default_config(Representation::ms);
  const auto ms = assemble(sig, ms_cfg, Representation::ms);
  Matrix<double> gs_a(480, 160);
  std::copy(gs.values.slab(0).begin(), gs.values.slab(0).end(), gs_a.values().begin());
  const auto expected = apply_bank(*ms_cfg.mel, gs_a);
  Matrix<double> ms_a(120, 160);
  std::copy(ms.values.slab(0).begin(), ms.values.slab(0).end(), ms_a.values().begin());
  EXPECT_LE(oracle::max_rel_error(ms_a, expected), 1e-10);
}

TEST(Assemble, MelSpectrogramUsesSquaredModulus) {
  const auto cfg = compact_config(Representation::mt);
  const auto sig = noise_signal(6, 44100);
  const auto mt = assemble(sig, cfg, Representation::mt);
  const auto coeffs = oracle::direct_gabor(sig.samples, cfg.layer1);
  Matrix<double> power(coeffs.rows(), coeffs.cols());
  for (std::size_t i = 0; i < power.size(); ++i) power.values()[i] = std::norm(coeffs.values()[i]);
  const auto expected = apply_bank(*cfg.mel, power);
  Matrix<double> got(mt.freq_bins(), mt.frames());
  std::copy(mt.values.values().begin(), mt.values.values().end(), got.values().begin());
  EXPECT_LE(oracle::max_rel_error(got, expected), 1e-10);
}

TEST(Assemble, ChannelsAreLayerOutputs) {
  const auto cfg = small_config(false);
  const auto sig = noise_signal(7, 3200);
  const auto gs = assemble(sig, cfg, Representation::gs);
  const auto a = layer1(sig, cfg);
  const auto b = output_atom(a, cfg.atom1, 1);
  const auto f2 = layer2(a, cfg);
  for (std::size_t j = 0; j < a.rows(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      EXPECT_EQ(gs.values(0, j, k), a(j, k));
      EXPECT_EQ(gs.values(1, j, k), b(j, k));
    }
  // Channel C, rebuilt one modulation bin at a time.
  Matrix<double> c(a.rows(), a.cols());
  for (std::size_t h = 1; h < f2.dim1(); ++h) {
    Matrix<double> slice(a.rows(), a.cols());
    for (std::size_t j = 0; j < a.rows(); ++j)
      for (std::size_t m = 0; m < a.cols(); ++m) slice(j, m) = f2(j, h, m);
    const auto smoothed = output_atom(slice, cfg.atom2, 1);
    for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] += smoothed.values()[i];
  }
  for (std::size_t j = 0; j < a.rows(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_NEAR(gs.values(2, j, k), c(j, k), 1e-12 * (1 + c(j, k)));
}

TEST(Assemble, SingleBinAggregation) {
  auto cfg = small_config(false);
  cfg.aggregation = Layer2Aggregation::single_bin;
  cfg.aggregation_bin = 3;
  const auto sig = noise_signal(8, 3200);
  const auto gs = assemble(sig, cfg, Representation::gs);
  const auto f2 = layer2(layer1(sig, cfg), cfg);
  Matrix<double> slice(f2.dim0(), f2.dim2());
  for (std::size_t j = 0; j < f2.dim0(); ++j)
    for (std::size_t m = 0; m < f2.dim2(); ++m) slice(j, m) = f2(j, 3, m);
  const auto expected = output_atom(slice, cfg.atom2, 1);
  for (std::size_t j = 0; j < f2.dim0(); ++j)
    for (std::size_t m = 0; m < f2.dim2(); ++m) EXPECT_DOUBLE_EQ(gs.values(2, j, m), expected(j, m));
  cfg.aggregation_bin = 9;
  EXPECT_THROW(assemble(sig, cfg, Representation::gs), ParameterError);
}

TEST(Assemble, LogCompressionIsOptIn) {
  auto cfg = compact_config(Representation::ms);
  const auto sig = tone(440.0, 44100);
  const auto plain = assemble(sig, cfg, Representation::ms);
  cfg.log_compress = true;
  const auto logged = assemble(sig, cfg, Representation::ms);
  for (std::size_t i = 0; i < plain.values.size(); ++i)
    EXPECT_NEAR(logged.values.values()[i], std::log1p(plain.values.values()[i]), 1e-12);
}

TEST(Assemble, TimeShiftStability) {
  // Delay by one layer-1 hop: interior columns equal the rolled tensor.
  for (auto kind : {Representation::gs, Representation::ms}) {
    const auto cfg = default_config(kind);
    const auto base = noise_signal(9, 44100 + cfg.layer1.hop);
    SampledSignal f{{base.samples.begin() + static_cast<long>(cfg.layer1.hop), base.samples.end()}, 44100};
    SampledSignal delayed{{base.samples.begin(), base.samples.begin() + 44100}, 44100};
    const auto a = assemble(f, cfg, kind);
    const auto b = assemble(delayed, cfg, kind);
    for (std::size_t c = 0; c < 3; ++c) {
      double scale = 0.0;
      for (double v : a.values.slab(c)) scale = std::max(scale, std::abs(v));
      double worst = 0.0;
      for (std::size_t j = 0; j < a.freq_bins(); ++j)
        for (std::size_t k = 25; k < 130; ++k)
          worst = std::max(worst, std::abs(b.values(c, j, k + 1) - a.values(c, j, k)));
      EXPECT_LE(worst, 1e-8 * scale) << to_string(kind) << " channel " << c;
    }
  }
}

TEST(Assemble, RejectsMismatchedSampleRate) {
  EXPECT_THROW(assemble(SampledSignal{std::vector<double>(44100, 0.0), 22050}, compact_config(Representation::gs),
                        Representation::gs),
               InputError);
}
