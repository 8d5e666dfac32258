// Acceptance checks. Prints one PASS/FAIL line per criterion on stdout
// (details go to stderr) and exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "scatterbox/atloss.hpp"
#include "scatterbox/dataset.hpp"
#include "scatterbox/mel.hpp"
#include "scatterbox/occlusion.hpp"
#include "scatterbox/scattering.hpp"
#include "scatterbox/synth.hpp"
#include "scatterbox/train.hpp"

using namespace sbx;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome shape_fidelity() {
  Outcome o;
  SplitMix64 rng(101);
  const std::size_t expected[][3] = {{1, 120, 160}, {3, 120, 160}, {3, 480, 160}};
  const Representation kinds[] = {Representation::mt, Representation::ms, Representation::gs};
  double slowest = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    SampledSignal sig{oracle::random_signal(rng, 44100), 44100};
    if (trial == 1) std::fill(sig.samples.begin(), sig.samples.end(), 0.0);
    for (int k = 0; k < 3; ++k) {
      const auto cfg = default_config(kinds[k]);
      const auto start = Clock::now();
      const auto f = assemble(sig, cfg, kinds[k]);
      slowest = std::max(slowest, seconds_since(start));
      o.require(f.channels() == expected[k][0] && f.freq_bins() == expected[k][1] && f.frames() == expected[k][2],
                to_string(kinds[k]) + " shape");
    }
  }
  o.require(slowest < 2.0, "runtime");
  o.note << "GS 3x480x160, MS 3x120x160, MT 1x120x160; slowest segment " << fmt(slowest) << " s";
  return o;
}

Outcome transform_oracle() {
  Outcome o;
  const auto start = Clock::now();
  SplitMix64 rng(202);
  const std::vector<GaborParams> lattices = {
      {{WindowKind::hann, 256, 0.0}, 64, 256, 129, 0},
      {{WindowKind::gauss, 200, 40.0}, 50, 256, 100, 0},
      {{WindowKind::tukey, 96, 0.3}, 33, 120, 61, 0},
      {{WindowKind::rectangular, 128, 0.0}, 128, 128, 65, 0},
      {{WindowKind::tukey, 150, 0.8}, 75, 150, 76, 0},
  };
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t len = 1 + rng.below(4096);
    auto p = lattices[static_cast<std::size_t>(i) % lattices.size()];
    p.frame_count = std::max<std::size_t>(1, (len + p.hop - 1) / p.hop);
    const auto f = oracle::random_signal(rng, len);
    worst = std::max(worst, oracle::max_rel_error(gabor_transform(f, p).values, oracle::direct_gabor(f, p)));
  }
  o.require(worst <= 1e-10, "gabor vs inner products");

  double bank_worst = 0.0;
  const std::vector<MelFilterBank> banks = {
      *default_config(Representation::ms).mel, *compact_config(Representation::mt).mel,
      build_mel_bank(44100, 1024, 300, 40, 50.0, 8000.0)};
  for (const auto& bank : banks) {
    Matrix<double> tf(bank.kept_channels(), 37);
    for (double& v : tf.values()) v = rng.uniform(0.0, 3.0);
    Matrix<double> expected(bank.filter_count(), tf.cols());
    for (std::size_t nu = 0; nu < bank.filter_count(); ++nu)
      for (std::size_t k = 0; k < tf.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < tf.rows(); ++j) acc += bank.filters(nu, j) * tf(j, k);
        expected(nu, k) = acc;
      }
    bank_worst = std::max(bank_worst, oracle::max_rel_error(apply_bank(bank, tf), expected));
  }
  o.require(bank_worst <= 1e-12, "apply_bank vs double loop");
  const double elapsed = seconds_since(start);
  o.require(elapsed < 30.0, "runtime");
  o.note << "gabor rel err " << fmt(worst) << " over 50 signals, apply_bank rel err " << fmt(bank_worst) << ", "
         << fmt(elapsed) << " s";
  return o;
}

Outcome frame_sanity() {
  Outcome o;
  const std::size_t n = 64, frames = 32;
  const GaborParams p{{WindowKind::rectangular, n, 0.0}, n, n, n / 2 + 1, frames};
  const auto est = frame_bounds(p, n * frames, 20, 303);
  o.require(std::abs(est.lower - 1.0) <= 1e-10 && std::abs(est.upper - 1.0) <= 1e-10, "A = B = 1");
  o.note << "A_est - 1 = " << fmt(est.lower - 1.0) << ", B_est - 1 = " << fmt(est.upper - 1.0);
  return o;
}

Outcome scattering_structure() {
  Outcome o;
  SplitMix64 rng(404);
  const SampledSignal noise{oracle::random_signal(rng, 44100), 44100};
  const auto gs = assemble(noise, default_config(Representation::gs), Representation::gs);
  const auto ms_cfg = default_config(Representation::ms);
  const auto ms = assemble(noise, ms_cfg, Representation::ms);
  Matrix<double> gs_a(480, 160), ms_a(120, 160);
  std::copy(gs.values.slab(0).begin(), gs.values.slab(0).end(), gs_a.values().begin());
  std::copy(ms.values.slab(0).begin(), ms.values.slab(0).end(), ms_a.values().begin());
  Matrix<double> expected(120, 160);
  for (std::size_t nu = 0; nu < 120; ++nu)
    for (std::size_t k = 0; k < 160; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 480; ++j) acc += ms_cfg.mel->filters(nu, j) * gs_a(j, k);
      expected(nu, k) = acc;
    }
  const double mel_err = oracle::max_rel_error(ms_a, expected);
  o.require(mel_err <= 1e-10, "MS channel A = mel(GS channel A)");

  // AM tones: 1 kHz carrier, 100 frames per second, 32-frame layer-2 window
  // (3.125 Hz per modulation bin).
  ScatteringConfig cfg;
  cfg.layer1 = GaborParams{{WindowKind::hann, 1024, 0.0}, 441, 1024, 64, 100};
  std::size_t misses = 0, checks = 0;
  for (auto window : {WindowKind::rectangular, WindowKind::hann}) {
    cfg.layer2 = GaborParams{{window, 32, 0.0}, 1, 32, 17, 100};
    for (double rate : {6.25, 9.375, 15.0, 21.875, 31.25}) {
      SampledSignal sig{std::vector<double>(44100), 44100};
      for (std::size_t n = 0; n < sig.size(); ++n) {
        const double t = static_cast<double>(n) / 44100.0;
        sig.samples[n] = (1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * rate * t)) *
                         std::sin(2.0 * std::numbers::pi * 1000.0 * t);
      }
      const auto f2 = layer2(layer1(sig, cfg), cfg);
      const std::size_t carrier = static_cast<std::size_t>(std::lround(1000.0 * 1024.0 / 44100.0));
      const long expected_bin = std::lround(rate / 3.125);
      // Hann leaks the envelope mean into bin 1, so its search starts at 2.
      const std::size_t first = window == WindowKind::hann ? 2 : 1;
      for (std::size_t m = 20; m < 80; ++m) {
        std::size_t best = first;
        for (std::size_t h = first + 1; h < f2.dim1(); ++h)
          if (f2(carrier, h, m) > f2(carrier, best, m)) best = h;
        ++checks;
        if (std::abs(static_cast<long>(best) - expected_bin) > 1) ++misses;
      }
    }
  }
  o.require(misses == 0, "AM argmax");
  o.note << "mel(GS A) vs MS A rel err " << fmt(mel_err) << "; AM argmax within 1 bin in " << checks - misses << "/"
         << checks << " frames";
  return o;
}

// Plain cross-entropy straight from the softmax definition.
double ce_oracle(const std::vector<double>& y, const std::vector<double>& z) {
  double top = z[0];
  for (double v : z) top = std::max(top, v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - top);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (y[i] != 0.0) loss -= y[i] * (z[i] - top - std::log(sum));
  return loss;
}

Outcome at_loss_correctness() {
  Outcome o;
  SplitMix64 rng(505);
  ATConfig zero{default_transforms(0.0), 1.0};
  double reduction = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(6);
    for (double& v : z) v = rng.uniform(-8.0, 8.0);
    const auto y = one_hot(rng.below(6), 6);
    const double ce = ce_oracle(y, z);
    reduction = std::max(reduction, std::abs(at_loss(y, z, zero) - ce) / std::max(1.0, ce));
  }
  o.require(reduction <= 1e-12, "reduction to CE");

  const auto cfg = default_at_config();
  double grad_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(6);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    const auto y = one_hot(rng.below(6), 6);
    const auto g = at_loss_grad(y, z, cfg);
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      const double h = 1e-5;
      auto up = z, down = z;
      up[k] += h;
      down[k] -= h;
      const double numeric = (at_loss(y, up, cfg) - at_loss(y, down, cfg)) / (2 * h);
      diff = std::max(diff, std::abs(g[k] - numeric));
      scale = std::max(scale, std::abs(numeric));
    }
    grad_err = std::max(grad_err, diff / std::max(scale, 1e-3));
  }
  o.require(grad_err <= 1e-6, "gradient");

  // Woodwind transform alone at weight 10; a confident wrong answer inside
  // the target's family must cost less than one outside it.
  const auto bank = default_transforms();
  ATConfig woodwind{{bank[0]}, 1.0};
  const auto& v = bank[0].vector;
  std::size_t holds = 0, pairs = 0;
  for (std::size_t target = 0; target < 6; ++target)
    for (std::size_t wrong = 0; wrong < 6; ++wrong) {
      if (wrong == target) continue;
      ++pairs;
      std::vector<double> z(6, 0.0);
      z[wrong] = 6.0;
      const double loss = at_loss(one_hot(target, 6), z, woodwind);
      bool ok = true;
      for (std::size_t other = 0; other < 6; ++other) {
        if (other == target || other == wrong || (v[other] == v[target]) == (v[wrong] == v[target])) continue;
        std::vector<double> z2(6, 0.0);
        z2[other] = 6.0;
        const double other_loss = at_loss(one_hot(target, 6), z2, woodwind);
        if (v[wrong] == v[target] ? !(loss < other_loss) : !(loss > other_loss)) ok = false;
      }
      holds += ok;
    }
  o.require(holds == pairs, "penalty ordering");
  o.note << "CE reduction err " << fmt(reduction) << ", gradient rel err " << fmt(grad_err) << " over 1000 draws, ordering "
         << holds << "/" << pairs << " pairs";
  return o;
}

Outcome trainer_gradients() {
  Outcome o;
  SplitMix64 rng(606);
  const auto at = default_at_config();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ConvClassifier<double> m(ConvClassifierSpec{1 + static_cast<std::size_t>(trial % 2), 6, 6, {{2, 3, 2}}, 6, 0.01, {}, {}});
    for (double& p : m.params) p = 0.5 * rng.normal();
    std::vector<std::vector<double>> xs(3, std::vector<double>(m.spec.input_size()));
    for (auto& x : xs)
      for (double& v : x) v = rng.normal();
    std::vector<std::size_t> labels{rng.below(6), rng.below(6), rng.below(6)};
    const std::vector<std::span<const double>> batch(xs.begin(), xs.end());
    const std::span<const std::span<const double>> bs(batch);
    const std::span<const std::size_t> ls(labels);
    std::vector<double> grad;
    loss_and_gradient(m, bs, ls, at, grad);
    std::vector<double> numeric(m.params.size());
    double top = 0.0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      const double keep = m.params[i], h = 1e-5;
      m.params[i] = keep + h;
      const double up = batch_loss(m, bs, ls, at);
      m.params[i] = keep - h;
      const double down = batch_loss(m, bs, ls, at);
      m.params[i] = keep;
      numeric[i] = (up - down) / (2 * h);
      top = std::max(top, std::abs(numeric[i]));
    }
    for (std::size_t i = 0; i < m.params.size(); ++i)
      worst = std::max(worst, std::abs(grad[i] - numeric[i]) / std::max(std::abs(numeric[i]), 1e-2 * top));
  }
  o.require(worst <= 1e-4, "backprop vs finite differences");
  o.note << "backprop rel err " << fmt(worst) << " over 20 trials; parameters";
  const std::size_t shapes[][3] = {{1, 120, 160}, {3, 120, 160}, {3, 480, 160}};
  const char* names[] = {"MT", "MS", "GS"};
  for (int k = 0; k < 3; ++k) {
    const auto count = parameter_count(standard_spec(shapes[k][0], shapes[k][1], shapes[k][2]));
    o.require(count >= 75000 && count <= 90000, std::string(names[k]) + " parameter count");
    o.note << " " << names[k] << " " << count;
  }
  return o;
}

Outcome synthetic_trend() {
  Outcome o;
  const auto start = Clock::now();
  const Representation kinds[] = {Representation::mt, Representation::ms, Representation::gs};
  const char* names[] = {"MT", "MS", "GS"};
  std::size_t below_target = 0, ms_early = 0, gs_early = 0, gs_and_ms_early = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto clips = synth_corpus(default_synth_classes(), SynthConfig{}, 1000 + seed);
    std::vector<AudioFileRecord> files;
    std::map<std::string, std::size_t> clip_index;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      files.push_back({clips[i].name, clips[i].label, clips[i].signal.size(), 0});
      clip_index[clips[i].name] = i;
    }
    SegmentSpec spec;
    for (const auto& c : default_classes()) spec.stride_per_class[c] = spec.segment_length;
    const auto split = sbx::split(files, spec, {}, seed);
    const auto labels = default_classes();

    std::size_t first90[3];
    for (int k = 0; k < 3; ++k) {
      const auto cfg = compact_config(kinds[k]);
      std::vector<std::vector<float>> features(clips.size());
      std::array<std::size_t, 3> shape{};
      for (std::size_t i = 0; i < clips.size(); ++i) {
        const auto f = assemble(clips[i].signal, cfg, kinds[k]);
        features[i].assign(f.values.values().begin(), f.values.values().end());
        shape = {f.channels(), f.freq_bins(), f.frames()};
      }
      auto gather = [&](const std::vector<SegmentRef>& refs) {
        LabeledSet set;
        for (const auto& r : refs) {
          set.inputs.push_back(features[clip_index.at(r.path)]);
          set.labels.push_back(static_cast<std::size_t>(std::find(labels.begin(), labels.end(), r.label) - labels.begin()));
        }
        return set;
      };
      const auto train_set = gather(split.train), val_set = gather(split.val), test_set = gather(split.test);
      ConvClassifierSpec mspec{shape[0], shape[1], shape[2], {{8, 3, 2}, {8, 3, 2}, {8, 3, 2}, {8, 3, 2}}, 6, 0.001, {}, {}};
      std::tie(mspec.input_offset, mspec.input_scale) = channel_statistics(train_set, shape[0]);
      ConvClassifier<float> model(mspec);
      model.init_he_uniform(seed);
      TrainConfig tc;
      tc.batch_size = 32;
      tc.max_weight_updates = 500;
      tc.eval_every = 5;
      tc.seed = seed;
      tc.stop_at_val_accuracy = 0.95;
      const auto r = train(model, train_set, val_set, test_set, tc);
      first90[k] = r.first_update_reaching(0.9).value_or(SIZE_MAX);
      if (r.best_val_accuracy < 0.95) ++below_target;
      std::cerr << "  seed " << seed << " " << names[k] << ": best val " << r.best_val_accuracy << " at update "
                << r.best_update << ", 90% at " << (first90[k] == SIZE_MAX ? -1 : static_cast<long>(first90[k]))
                << ", test " << r.test_accuracy << '\n';
    }
    ms_early += first90[1] <= first90[0];
    gs_early += first90[2] <= first90[0];
    gs_and_ms_early += first90[1] <= first90[0] && first90[2] <= first90[0];
  }
  const double elapsed = seconds_since(start);
  o.require(below_target == 0, "every run reaches 95% validation accuracy");
  o.require(gs_early >= 7 && ms_early >= 7, "GS and MS reach 90% no later than MT in >= 7 of 10 seeds");
  o.require(elapsed <= 900.0, "runtime");
  o.note << "30 runs, " << 30 - below_target << " reach 95% val; 90% no later than MT: GS " << gs_early << "/10, MS "
         << ms_early << "/10 (both " << gs_and_ms_early << "/10); " << fmt(elapsed) << " s";
  return o;
}

Outcome pipeline_invariants() {
  Outcome o;
  const auto start = Clock::now();
  // Fixture corpus: uneven files per class and uneven durations.
  std::vector<AudioFileRecord> files;
  SplitMix64 rng(808);
  const auto& classes = default_classes();
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t f = 0; f < 12 + 3 * c; ++f)
      files.push_back({classes[c] + "/take_" + std::to_string(f) + ".wav", classes[c], 44100 * (1 + rng.below(6)) + rng.below(44100), 0});
  SegmentSpec spec;
  for (std::size_t c = 0; c < classes.size(); ++c) spec.stride_per_class[classes[c]] = 22050 + 4410 * c;

  std::size_t deterministic = 0, leak_free = 0, balanced = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = sbx::split(files, spec, {}, seed), b = sbx::split(files, spec, {}, seed);
    deterministic += manifest_string(a) == manifest_string(b);
    std::map<std::string, std::set<SplitSet>> where;
    for (auto s : {SplitSet::train, SplitSet::val, SplitSet::test})
      for (const auto& r : a.set(s)) where[r.path].insert(s);
    bool no_leak = true;
    for (const auto& [path, sets] : where) no_leak = no_leak && sets.size() == 1;
    leak_free += no_leak;
    const auto val = per_class_counts(a.val), test = per_class_counts(a.test);
    bool equal = val.size() == classes.size() && test.size() == classes.size();
    for (const auto& [label, n] : val) equal = equal && n == val.begin()->second && test.at(label) == n;
    balanced += equal;
  }
  const double elapsed = seconds_since(start);
  o.require(deterministic == 100, "determinism");
  o.require(leak_free == 100, "file leakage");
  o.require(balanced == 100, "val/test balance");
  o.require(elapsed < 60.0, "runtime");
  o.note << "100 seeds: deterministic " << deterministic << ", leak-free " << leak_free << ", balanced " << balanced
         << "; " << fmt(elapsed) << " s";
  return o;
}

Outcome occlusion_oracle() {
  Outcome o;
  SplitMix64 rng(909);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t channels = 1 + static_cast<std::size_t>(trial % 2);
    ConvClassifier<double> m(ConvClassifierSpec{channels, 6, 6, {{2, 3, 2}}, 6, 0.0, {}, {}});
    for (double& p : m.params) p = 0.7 * rng.normal();
    Tensor3<double> x(channels, 6, 6);
    for (double& v : x.values()) v = rng.normal();
    const std::size_t cls = rng.below(6);
    OcclusionConfig cfg;
    cfg.window_freq = cfg.window_frames = cfg.stride_freq = cfg.stride_frames = 1;
    const auto map = occlusion_map(m, x, cls, cfg);
    auto prob = [&](const std::vector<double>& in) {
      Workspace<double> ws;
      forward_sample(m, std::span<const double>(in), ws);
      double top = ws.logits[0], sum = 0.0;
      for (double z : ws.logits) top = std::max(top, z);
      for (double z : ws.logits) sum += std::exp(z - top);
      return std::exp(ws.logits[cls] - top) / sum;
    };
    const double base = prob(x.values());
    for (std::size_t u = 0; u < 6; ++u)
      for (std::size_t v = 0; v < 6; ++v) {
        auto masked = x.values();
        for (std::size_t c = 0; c < channels; ++c) masked[(c * 6 + u) * 6 + v] = 0.0;
        worst = std::max(worst, std::abs(map(u, v) - (base - prob(masked))));
      }
  }
  o.require(worst <= 1e-10, "single-pixel map vs exhaustive masking");
  o.note << "max abs difference " << fmt(worst) << " over 5 models";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"shape fidelity", shape_fidelity},
      {"transform oracle equivalence", transform_oracle},
      {"frame sanity", frame_sanity},
      {"scattering structure", scattering_structure},
      {"AT loss correctness", at_loss_correctness},
      {"trainer gradients", trainer_gradients},
      {"end-to-end synthetic trend", synthetic_trend},
      {"pipeline invariants", pipeline_invariants},
      {"occlusion oracle", occlusion_oracle},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.note.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
