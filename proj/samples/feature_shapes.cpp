// Computes MT, MS and GS features for one synthetic second of audio and
// prints their shapes, timings and the classifier size for each input.

#include <chrono>
#include <iostream>

#include "scatterbox/model.hpp"
#include "scatterbox/scattering.hpp"
#include "scatterbox/synth.hpp"

int main() {
  using namespace sbx;
  SplitMix64 rng(1);
  const auto clip = synth_clip(default_synth_classes()[3], SynthConfig{}, rng);

  for (auto kind : {Representation::mt, Representation::ms, Representation::gs}) {
    const auto cfg = default_config(kind);
    const auto start = std::chrono::steady_clock::now();
    const auto features = assemble(clip, cfg, kind);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto spec = standard_spec(features.channels(), features.freq_bins(), features.frames());
    std::cout << to_string(kind) << ": " << features.channels() << "x" << features.freq_bins() << "x"
              << features.frames() << " in " << seconds << " s; classifier with fourth stack of "
              << spec.stacks.back().kernels << " kernels has " << parameter_count(spec) << " parameters\n";
  }
}
